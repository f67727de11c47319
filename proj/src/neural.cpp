#include "growsched/neural.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "growsched/random.hpp"

namespace growsched {

void Matrix::pad_columns(std::size_t new_cols) {
    if (new_cols < cols_) throw std::invalid_argument("pad_columns cannot shrink a matrix");
    if (new_cols == cols_) return;
    std::vector<double> padded(rows_ * new_cols, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_), cols_,
                    padded.begin() + static_cast<std::ptrdiff_t>(r * new_cols));
    }
    data_ = std::move(padded);
    cols_ = new_cols;
}

void TwoLayerClassifier::validate() const {
    if (hidden.outputs() != kHiddenUnits || hidden.bias.size() != kHiddenUnits) {
        throw std::invalid_argument("hidden layer must have 30 units");
    }
    if (output.inputs() != kHiddenUnits || output.outputs() != kClassCount || output.bias.size() != kClassCount) {
        throw std::invalid_argument("output layer must map 30 -> 26");
    }
    if (hidden.inputs() == 0) throw std::invalid_argument("features_count must be >= 1");
}

namespace {

DenseLayer init_layer(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0), false};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : layer.weights.values()) w = uniform_real(rng, -bound, bound);
    return layer;
}

void affine_rows(const Matrix& inputs, const DenseLayer& layer, Matrix& out) {
    // out[b][j] = bias[j] + sum_f W[j][f] * x[b][f], summed in ascending f;
    // zero inputs are skipped. W is transposed once so each input touches a
    // contiguous column.
    const std::size_t in = layer.inputs();
    const std::size_t units = layer.outputs();
    std::vector<double> wt(in * units);
    for (std::size_t j = 0; j < units; ++j) {
        const auto w = layer.weights.row(j);
        for (std::size_t f = 0; f < in; ++f) wt[f * units + j] = w[f];
    }
    for (std::size_t b = 0; b < inputs.rows(); ++b) {
        auto x = inputs.row(b);
        auto z = out.row(b);
        std::copy(layer.bias.begin(), layer.bias.end(), z.begin());
        for (std::size_t f = 0; f < in; ++f) {
            const double xf = x[f];
            if (xf == 0.0) continue;
            const double* col = wt.data() + f * units;
            for (std::size_t j = 0; j < units; ++j) z[j] += col[j] * xf;
        }
    }
}

}  // namespace

TwoLayerClassifier init_model(std::size_t features_count, std::uint64_t seed, Activation activation) {
    if (features_count == 0) throw std::invalid_argument("features_count must be >= 1");
    Rng rng(mix_seed(seed, 0x1a1e));
    TwoLayerClassifier model;
    model.hidden = init_layer(features_count, kHiddenUnits, rng);
    model.output = init_layer(kHiddenUnits, kClassCount, rng);
    model.activation = activation;
    return model;
}

ForwardPass forward_batch(const TwoLayerClassifier& model, const Matrix& inputs) {
    if (inputs.cols() != model.features_count()) {
        throw std::invalid_argument("input width " + std::to_string(inputs.cols()) + " != model features " +
                                    std::to_string(model.features_count()));
    }
    ForwardPass pass{Matrix(inputs.rows(), kHiddenUnits), Matrix(inputs.rows(), kHiddenUnits),
                     Matrix(inputs.rows(), kClassCount)};
    affine_rows(inputs, model.hidden, pass.hidden_pre);
    pass.hidden = pass.hidden_pre;
    if (model.activation == Activation::Relu) {
        for (double& h : pass.hidden.values()) h = std::max(h, 0.0);
    }
    affine_rows(pass.hidden, model.output, pass.logits);
    return pass;
}

std::vector<double> forward(const TwoLayerClassifier& model, std::span<const double> x) {
    Matrix inputs(1, x.size());
    std::copy(x.begin(), x.end(), inputs.row(0).begin());
    const auto pass = forward_batch(model, inputs);
    auto logits = pass.logits.row(0);
    return {logits.begin(), logits.end()};
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

LossAndGradient weighted_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                       std::span<const double> class_weights) {
    if (logits.rows() == 0) throw std::invalid_argument("weighted_cross_entropy: empty batch");
    if (labels.size() != logits.rows()) throw std::invalid_argument("weighted_cross_entropy: label count mismatch");
    if (class_weights.size() != logits.cols()) {
        throw std::invalid_argument("weighted_cross_entropy: class weight count mismatch");
    }

    LossAndGradient out{0.0, Matrix(logits.rows(), logits.cols())};
    double weight_sum = 0.0;
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= logits.cols()) {
            throw std::invalid_argument("weighted_cross_entropy: label out of range");
        }
        weight_sum += class_weights[static_cast<std::size_t>(label)];
    }

    for (std::size_t b = 0; b < logits.rows(); ++b) {
        const auto z = logits.row(b);
        const auto label = static_cast<std::size_t>(labels[b]);
        const double peak = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (double v : z) total += std::exp(v - peak);
        const double log_partition = peak + std::log(total);
        const double w = class_weights[label] / weight_sum;
        out.loss += w * (log_partition - z[label]);

        auto g = out.grad_logits.row(b);
        for (std::size_t k = 0; k < z.size(); ++k) g[k] = w * std::exp(z[k] - log_partition);
        g[label] -= w;
    }
    return out;
}

std::vector<double> default_class_weights(double group0_weight) {
    std::vector<double> weights(kClassCount, 1.0);
    weights[0] = group0_weight;
    return weights;
}

Gradients backward(const TwoLayerClassifier& model, const Matrix& inputs, const ForwardPass& pass,
                   const Matrix& grad_logits) {
    const std::size_t batch = inputs.rows();
    const std::size_t features = model.features_count();
    if (grad_logits.rows() != batch || grad_logits.cols() != kClassCount) {
        throw std::invalid_argument("backward: gradient shape mismatch");
    }

    Gradients g{Matrix(kHiddenUnits, features), std::vector<double>(kHiddenUnits, 0.0),
                Matrix(kClassCount, kHiddenUnits), std::vector<double>(kClassCount, 0.0)};
    Matrix grad_hidden_pre(batch, kHiddenUnits);
    std::vector<double> grad_w1_t(features * kHiddenUnits, 0.0);  // [features x 30]

    for (std::size_t b = 0; b < batch; ++b) {
        const auto dz2 = grad_logits.row(b);
        const auto h = pass.hidden.row(b);
        for (std::size_t k = 0; k < kClassCount; ++k) {
            const double d = dz2[k];
            if (d == 0.0) continue;
            g.output_bias[k] += d;
            for (std::size_t j = 0; j < kHiddenUnits; ++j) g.output_weights(k, j) += d * h[j];
        }

        auto dz1 = grad_hidden_pre.row(b);
        for (std::size_t j = 0; j < kHiddenUnits; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kClassCount; ++k) acc += dz2[k] * model.output.weights(k, j);
            if (model.activation == Activation::Relu && pass.hidden_pre(b, j) <= 0.0) acc = 0.0;
            dz1[j] = acc;
            g.hidden_bias[j] += acc;
        }

        const auto x = inputs.row(b);
        for (std::size_t f = 0; f < features; ++f) {
            const double xf = x[f];
            if (xf == 0.0) continue;
            double* col = grad_w1_t.data() + f * kHiddenUnits;
            for (std::size_t j = 0; j < kHiddenUnits; ++j) col[j] += dz1[j] * xf;
        }
    }
    for (std::size_t j = 0; j < kHiddenUnits; ++j) {
        auto row = g.hidden_weights.row(j);
        for (std::size_t f = 0; f < features; ++f) row[f] = grad_w1_t[f * kHiddenUnits + j];
    }
    return g;
}

std::vector<double> gradient_multipliers(std::size_t pretrained, std::size_t total, double rate) {
    if (pretrained > total) throw std::invalid_argument("gradient_multipliers: pretrained > total");
    std::vector<double> out(total, 1.0);
    std::fill_n(out.begin(), pretrained, rate);
    return out;
}

void apply_column_multipliers(Matrix& grad_hidden_weights, std::span<const double> multipliers) {
    if (multipliers.size() != grad_hidden_weights.cols()) {
        throw std::invalid_argument("apply_column_multipliers: " + std::to_string(multipliers.size()) +
                                    " multipliers for " + std::to_string(grad_hidden_weights.cols()) + " columns");
    }
    for (std::size_t r = 0; r < grad_hidden_weights.rows(); ++r) {
        auto row = grad_hidden_weights.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] *= multipliers[c];
    }
}

void adam_update(const AdamConfig& config, AdamMoments& moments, std::int64_t step, std::span<double> params,
                 std::span<const double> grads) {
    if (params.size() != grads.size() || moments.first.size() != params.size()) {
        throw std::invalid_argument("adam_update: shape mismatch");
    }
    if (step < 1) throw std::invalid_argument("adam_update: step must be >= 1");
    const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = moments.first[i];
        double& v = moments.second[i];
        m = config.beta1 * m + (1.0 - config.beta1) * grads[i];
        v = config.beta2 * v + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

AdamOptimizer::AdamOptimizer(const TwoLayerClassifier& model, AdamConfig config)
    : config_(config),
      hidden_weights_(model.hidden.weights.values().size()),
      hidden_bias_(model.hidden.bias.size()),
      output_weights_(model.output.weights.values().size()),
      output_bias_(model.output.bias.size()) {}

void AdamOptimizer::step(TwoLayerClassifier& model, const Gradients& grads) {
    ++step_;
    if (!model.hidden.frozen) {
        adam_update(config_, hidden_weights_, step_, model.hidden.weights.values(), grads.hidden_weights.values());
        adam_update(config_, hidden_bias_, step_, model.hidden.bias, grads.hidden_bias);
    }
    if (!model.output.frozen) {
        adam_update(config_, output_weights_, step_, model.output.weights.values(), grads.output_weights.values());
        adam_update(config_, output_bias_, step_, model.output.bias, grads.output_bias);
    }
}

int argmax(std::span<const double> values) {
    if (values.empty()) return -1;
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace growsched
