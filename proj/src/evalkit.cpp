#include "growsched/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "growsched/random.hpp"

namespace growsched {

void SplitConfig::validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test_fraction must be in (0, 1)");
    }
}

TrainTestSplit stratified_split(const DatasetSnapshot& data, const SplitConfig& config) {
    config.validate();
    const std::size_t n = data.size();
    if (n < 4) throw std::invalid_argument("stratified_split needs at least 4 rows, got " + std::to_string(n));

    Rng rng(mix_seed(config.seed, 0x5b17));
    const auto target_total = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.test_fraction)), 1, n - 1);

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[data.y[i]].push_back(i);
    const bool stratifiable = config.stratify && std::all_of(by_class.begin(), by_class.end(),
                                                             [](const auto& kv) { return kv.second.size() >= 2; });

    std::vector<std::size_t> test_rows;
    if (stratifiable) {
        struct Quota {
            int label;
            std::size_t take;
            double remainder;
            std::uint64_t tie;
        };
        std::vector<Quota> quotas;
        std::size_t assigned = 0;
        for (const auto& [label, rows] : by_class) {
            const double exact = static_cast<double>(rows.size()) * config.test_fraction;
            const auto base = static_cast<std::size_t>(std::floor(exact));
            quotas.push_back({label, base, exact - static_cast<double>(base), rng()});
            assigned += base;
        }
        std::vector<std::size_t> order(quotas.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (quotas[a].remainder != quotas[b].remainder) return quotas[a].remainder > quotas[b].remainder;
            return quotas[a].tie < quotas[b].tie;
        });
        for (std::size_t k = 0; assigned < target_total && k < order.size(); ++k, ++assigned) {
            ++quotas[order[k]].take;
        }
        for (auto& q : quotas) {
            auto rows = by_class.at(q.label);
            q.take = std::clamp<std::size_t>(q.take, 1, rows.size() - 1);
            shuffle_in_place(rows, rng);
            test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(q.take));
        }
    } else {
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        shuffle_in_place(rows, rng);
        test_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(target_total));
    }

    std::sort(test_rows.begin(), test_rows.end());
    std::vector<std::size_t> train_rows;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (cursor < test_rows.size() && test_rows[cursor] == i) {
            ++cursor;
        } else {
            train_rows.push_back(i);
        }
    }
    return TrainTestSplit{data.subset(train_rows), data.subset(test_rows), stratifiable};
}

Metrics metrics_from_confusion(const ConfusionMatrix& confusion) {
    Metrics m;
    m.confusion = confusion;
    std::array<std::size_t, kClassCount> predicted{};
    std::size_t correct = 0;
    for (std::size_t t = 0; t < kClassCount; ++t) {
        for (std::size_t p = 0; p < kClassCount; ++p) {
            m.support[t] += confusion[t][p];
            predicted[p] += confusion[t][p];
            m.total += confusion[t][p];
        }
        correct += confusion[t][t];
    }
    m.accuracy = m.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(m.total);

    double f1_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        const auto tp = static_cast<double>(confusion[c][c]);
        if (predicted[c] > 0) m.precision[c] = tp / static_cast<double>(predicted[c]);
        if (m.support[c] == 0) continue;
        m.recall[c] = tp / static_cast<double>(m.support[c]);
        const double p = m.precision[c].value_or(0.0);
        const double r = *m.recall[c];
        m.f1[c] = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        f1_sum += *m.f1[c];
        ++present;
    }
    if (present > 0) m.macro_f1 = f1_sum / static_cast<double>(present);
    return m;
}

Metrics evaluate_predictions(std::span<const int> labels, std::span<const int> predictions) {
    if (labels.size() != predictions.size()) throw std::invalid_argument("label/prediction count mismatch");
    ConfusionMatrix confusion{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int t = labels[i];
        const int p = predictions[i];
        if (t < 0 || t > kMaxGroup || p < 0 || p > kMaxGroup) throw std::invalid_argument("class out of range");
        ++confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return metrics_from_confusion(confusion);
}

std::vector<int> predict(const TwoLayerClassifier& model, const DatasetSnapshot& data) {
    if (data.features_count != model.features_count()) {
        throw std::invalid_argument("dataset has " + std::to_string(data.features_count) + " features, model expects " +
                                    std::to_string(model.features_count()));
    }
    constexpr std::size_t kChunk = 256;
    std::vector<int> out;
    out.reserve(data.size());
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const std::size_t rows = std::min(kChunk, data.size() - start);
        Matrix inputs(rows, data.features_count);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto bits = data.x[start + r].bits();
            std::copy(bits.begin(), bits.end(), inputs.row(r).begin());
        }
        const auto pass = forward_batch(model, inputs);
        for (std::size_t r = 0; r < rows; ++r) out.push_back(argmax(pass.logits.row(r)));
    }
    return out;
}

Metrics evaluate(const TwoLayerClassifier& model, const DatasetSnapshot& test) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    const auto predictions = predict(model, test);
    return evaluate_predictions(test.y, predictions);
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return {buf, ptr};
}

std::string format_report(std::span<const StepReport> rows, ReportFormat format) {
    if (format == ReportFormat::Csv) {
        std::string out = "step_time,features_count,model,epochs,attempts,accuracy,group0_f1\n";
        for (const auto& r : rows) {
            out += std::to_string(r.step_time_us) + ',' + std::to_string(r.features_count) + ',' + r.model + ',' +
                   std::to_string(r.epochs) + ',' + std::to_string(r.attempts) + ',' + format_double(r.accuracy) + ',' +
                   (r.group0_f1 ? format_double(*r.group0_f1) : std::string{}) + '\n';
        }
        return out;
    }
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json row;
        row["step_time"] = r.step_time_us;
        row["features_count"] = r.features_count;
        row["model"] = r.model;
        row["epochs"] = r.epochs;
        row["attempts"] = r.attempts;
        row["accuracy"] = r.accuracy;
        row["group0_f1"] = r.group0_f1 ? nlohmann::ordered_json(*r.group0_f1) : nlohmann::ordered_json(nullptr);
        doc.push_back(std::move(row));
    }
    return doc.dump(2) + '\n';
}

void write_report(std::span<const StepReport> rows, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open report file " + path.string());
    out << format_report(rows, format);
    if (!out) throw std::runtime_error("failed writing report file " + path.string());
}

std::vector<StepReport> read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report file " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<StepReport> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (cells.size() != 7) throw std::runtime_error("malformed report row: " + line);
        StepReport r;
        r.step_time_us = std::stoll(cells[0]);
        r.features_count = std::stoull(cells[1]);
        r.model = cells[2];
        r.epochs = std::stoull(cells[3]);
        r.attempts = std::stoull(cells[4]);
        r.accuracy = std::stod(cells[5]);
        if (!cells[6].empty()) r.group0_f1 = std::stod(cells[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace growsched
