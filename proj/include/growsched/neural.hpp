#ifndef GROWSCHED_NEURAL_HPP
#define GROWSCHED_NEURAL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace growsched {

inline constexpr std::size_t kHiddenUnits = 30;
inline constexpr std::size_t kClassCount = 26;

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    /// Appends zero columns on the right; existing entries keep their (r, c).
    void pad_columns(std::size_t new_cols);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct DenseLayer {
    Matrix weights;  // [out x in]
    std::vector<double> bias;
    bool frozen = false;

    std::size_t inputs() const { return weights.cols(); }
    std::size_t outputs() const { return weights.rows(); }
};

enum class Activation { Identity, Relu };

/// features -> 30 -> 26 classifier. Identity hidden activation keeps the
/// network a pure composition of two linear maps.
struct TwoLayerClassifier {
    DenseLayer hidden;
    DenseLayer output;
    Activation activation = Activation::Identity;

    std::size_t features_count() const { return hidden.inputs(); }
    /// Throws std::invalid_argument on inconsistent shapes.
    void validate() const;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
TwoLayerClassifier init_model(std::size_t features_count, std::uint64_t seed,
                              Activation activation = Activation::Identity);

std::vector<double> forward(const TwoLayerClassifier& model, std::span<const double> x);

/// Intermediates kept for backward().
struct ForwardPass {
    Matrix hidden_pre;  // [batch x 30]
    Matrix hidden;      // [batch x 30]
    Matrix logits;      // [batch x 26]
};

ForwardPass forward_batch(const TwoLayerClassifier& model, const Matrix& inputs);

std::vector<double> softmax(std::span<const double> logits);

struct LossAndGradient {
    double loss = 0.0;
    Matrix grad_logits;
};

/// Weighted mean of -log softmax(z)[y]: sum(w[y_i] * l_i) / sum(w[y_i]).
LossAndGradient weighted_cross_entropy(const Matrix& logits, std::span<const int> labels,
                                       std::span<const double> class_weights);

/// [group0_weight, 1, 1, ..., 1]
std::vector<double> default_class_weights(double group0_weight = 200.0);

struct Gradients {
    Matrix hidden_weights;
    std::vector<double> hidden_bias;
    Matrix output_weights;
    std::vector<double> output_bias;
};

Gradients backward(const TwoLayerClassifier& model, const Matrix& inputs, const ForwardPass& pass,
                   const Matrix& grad_logits);

/// [rate] * pretrained ++ [1] * (total - pretrained)
std::vector<double> gradient_multipliers(std::size_t pretrained, std::size_t total, double rate);

/// Scales column j of the input-layer weight gradient by multipliers[j].
void apply_column_multipliers(Matrix& grad_hidden_weights, std::span<const double> multipliers);

struct AdamConfig {
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamMoments {
    std::vector<double> first;
    std::vector<double> second;

    explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place; `step` is the 1-based
/// update count.
void adam_update(const AdamConfig& config, AdamMoments& moments, std::int64_t step, std::span<double> params,
                 std::span<const double> grads);

/// Optimizer state for a whole classifier. Frozen layers are skipped
/// entirely: neither their moments nor their parameters move.
class AdamOptimizer {
public:
    AdamOptimizer(const TwoLayerClassifier& model, AdamConfig config = {});

    void step(TwoLayerClassifier& model, const Gradients& grads);
    std::int64_t steps_taken() const { return step_; }

private:
    AdamConfig config_;
    std::int64_t step_ = 0;
    AdamMoments hidden_weights_;
    AdamMoments hidden_bias_;
    AdamMoments output_weights_;
    AdamMoments output_bias_;
};

/// Index of the largest logit; ties resolve to the lowest index.
int argmax(std::span<const double> values);

}  // namespace growsched

#endif  // GROWSCHED_NEURAL_HPP
