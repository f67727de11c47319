#include "growsched/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "growsched/random.hpp"

namespace growsched {

ArmSelection parse_arms(const std::string& text) {
    ArmSelection arms{false, false};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == kGrowingArm) {
            arms.growing = true;
        } else if (item == kFullyRetrainArm) {
            arms.fully_retrain = true;
        } else {
            throw std::invalid_argument("unknown arm '" + item + "' (expected growing or fully_retrain)");
        }
    }
    if (!arms.growing && !arms.fully_retrain) throw std::invalid_argument("no arm selected");
    return arms;
}

void RunConfig::validate() const {
    if (!trace_path) trace.validate();
    if (trace_path && !std::filesystem::exists(*trace_path)) {
        throw std::invalid_argument("trace file " + trace_path->string() + " does not exist");
    }
    if (grouping.increment == 0) throw std::invalid_argument("grouping increment must be >= 1");
    train.validate();
    split.validate();
    scheduler.validate();
    if (bulk_growth_limit == 0) throw std::invalid_argument("bulk_growth_limit must be >= 1");
    if (!arms.growing && !arms.fully_retrain) throw std::invalid_argument("no arm selected");
}

RunConfig desk_run_config(std::uint64_t seed) {
    RunConfig config;
    config.trace.seed = seed;
    config.trace.growth_schedule = even_growth_schedule(kDeskGrowthSteps, kDeskValuesPerStep, config.trace.span_us);
    config.grouping.increment = kDeskIncrement;
    config.seed = seed;
    return config;
}

std::string canonical_config(const RunConfig& c) {
    std::ostringstream out;
    auto kv = [&out](const char* key, const auto& value) { out << key << '=' << value << '\n'; };
    auto real = [&kv](const char* key, double value) { kv(key, format_double(value)); };
    if (c.trace_path) {
        kv("trace.path", c.trace_path->generic_string());
    } else {
        kv("trace.node_count", c.trace.node_count);
        kv("trace.attribute_count", c.trace.attribute_count);
        kv("trace.values_per_attribute", c.trace.values_per_attribute);
        kv("trace.task_count", c.trace.task_count);
        real("trace.constrained_fraction", c.trace.constrained_fraction);
        real("trace.restrictive_rate", c.trace.restrictive_rate);
        real("trace.mean_duration_us", c.trace.mean_duration_us);
        kv("trace.span_us", c.trace.span_us);
        real("trace.unset_fraction", c.trace.unset_fraction);
        real("trace.new_template_probability", c.trace.new_template_probability);
        kv("trace.seed", c.trace.seed);
        for (const auto& g : c.trace.growth_schedule) out << "trace.growth=" << g.time_us << ':' << g.count << '\n';
    }
    kv("grouping.increment", c.grouping.increment);
    real("train.learning_rate", c.train.learning_rate);
    real("train.group0_weight", c.train.group0_weight);
    real("train.pretrained_gradient_rate", c.train.pretrained_gradient_rate);
    kv("train.epochs_limit", c.train.epochs_limit);
    real("train.accepted_accuracy", c.train.accepted_accuracy);
    real("train.accepted_group0_f1", c.train.accepted_group0_f1);
    kv("train.max_attempts", c.train.max_attempts);
    kv("train.batch_size", c.train.batch_size);
    kv("train.activation", c.train.activation == Activation::Relu ? "relu" : "identity");
    real("split.test_fraction", c.split.test_fraction);
    kv("split.stratify", c.split.stratify);
    kv("history_windows", c.history_windows);
    kv("bulk_growth_limit", c.bulk_growth_limit);
    kv("split_bulk_growth", c.split_bulk_growth);
    kv("seed", c.seed);
    kv("arms.growing", c.arms.growing);
    kv("arms.fully_retrain", c.arms.fully_retrain);
    return out.str();
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

ArmSummary summarize(const std::vector<StepReport>& rows, const std::vector<TrainMode>& modes, const std::string& arm) {
    ArmSummary s;
    s.arm = arm;
    double accuracy_sum = 0.0;
    double f1_sum = 0.0;
    std::size_t f1_count = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.model != arm) continue;
        ++s.steps;
        accuracy_sum += r.accuracy;
        s.total_epochs += r.epochs;
        if (r.group0_f1) {
            f1_sum += *r.group0_f1;
            ++f1_count;
        }
        if (i < modes.size() && modes[i] == TrainMode::Failed) ++s.failed_steps;
    }
    if (s.steps > 0) s.mean_accuracy = accuracy_sum / static_cast<double>(s.steps);
    if (f1_count > 0) s.mean_group0_f1 = f1_sum / static_cast<double>(f1_count);
    return s;
}

bool RunManifest::any_failed() const {
    return std::find(modes.begin(), modes.end(), TrainMode::Failed) != modes.end();
}

namespace {

struct ArmRow {
    StepReport report;
    TrainMode mode;
};

ArmRow make_row(std::int64_t time, std::size_t features, const char* arm, const TrainOutcome& outcome) {
    return {StepReport{time, features, arm, outcome.epochs_used, outcome.attempts_used, outcome.accuracy,
                       outcome.group0_f1},
            outcome.mode};
}

DatasetSnapshot truncate_columns(const DatasetSnapshot& data, std::size_t width) {
    DatasetSnapshot out;
    out.y = data.y;
    out.features_count = width;
    out.step_time_us = data.step_time_us;
    out.x.reserve(data.x.size());
    for (const auto& row : data.x) {
        CovvVector v(width);
        for (std::size_t i = 0; i < width; ++i) {
            if (row.test(i)) v.set(i);
        }
        out.x.push_back(std::move(v));
    }
    return out;
}

class StepRunner {
public:
    explicit StepRunner(const RunConfig& config) : config_(config) {}

    void fire(std::vector<TaskConstraintSet> window, std::int64_t time, FeatureRegistry& registry,
              const NodeInventory& inventory) {
        std::vector<TaskConstraintSet> tasks;
        for (const auto& earlier : history_) tasks.insert(tasks.end(), earlier.begin(), earlier.end());
        tasks.insert(tasks.end(), window.begin(), window.end());
        history_.push_back(std::move(window));
        while (history_.size() > config_.history_windows) history_.pop_front();

        const std::size_t step = manifest_.steps++;
        auto built = build_snapshot(tasks, registry, inventory, config_.grouping, time);
        manifest_.dropped_unschedulable += built.dropped_unschedulable;
        const auto& snapshot = built.snapshot;
        if (snapshot.size() < 4) {
            spdlog::warn("step {} at t={}: {} labeled rows, too few to split; skipped", step, time, snapshot.size());
            ++manifest_.skipped_steps;
            return;
        }

        SplitConfig split_config = config_.split;
        split_config.seed = mix_seed(config_.seed, step);
        const auto split = stratified_split(snapshot, split_config);
        TrainConfig train_config = config_.train;
        train_config.seed = mix_seed(config_.seed, 0x100000 + step);

        auto grow = [&]() { return run_growing(split, train_config, time); };
        auto full = [&]() {
            const auto r = train_full(snapshot.features_count, split, train_config);
            return std::vector<ArmRow>{make_row(time, snapshot.features_count, kFullyRetrainArm, r.outcome)};
        };

        std::vector<ArmRow> grow_rows;
        std::vector<ArmRow> full_rows;
        if (config_.parallel_arms && config_.arms.growing && config_.arms.fully_retrain) {
            auto pending = std::async(std::launch::async, full);
            grow_rows = grow();
            full_rows = pending.get();
        } else {
            if (config_.arms.growing) grow_rows = grow();
            if (config_.arms.fully_retrain) full_rows = full();
        }
        for (auto* rows : {&grow_rows, &full_rows}) {
            for (auto& r : *rows) {
                spdlog::info("step {} t={} features={} {}: {} epochs={} attempts={} accuracy={:.4f}", step, time,
                             r.report.features_count, r.report.model, to_string(r.mode), r.report.epochs,
                             r.report.attempts, r.report.accuracy);
                manifest_.rows.push_back(std::move(r.report));
                manifest_.modes.push_back(r.mode);
            }
        }
    }

    RunManifest finish() {
        manifest_.final_growing_model = std::move(growing_);
        return std::move(manifest_);
    }

private:
    std::vector<ArmRow> run_growing(const TrainTestSplit& split, const TrainConfig& train_config, std::int64_t time) {
        const std::size_t width = split.train.features_count;
        if (!growing_) {
            auto r = train_full(width, split, train_config);
            growing_ = std::move(r.state);
            return {make_row(time, width, kGrowingArm, r.outcome)};
        }
        const std::size_t old_width = growing_->features_count();
        const std::size_t added = width - old_width;
        std::vector<std::size_t> widths{width};
        if (added > config_.bulk_growth_limit) {
            ++manifest_.bulk_growth_warnings;
            spdlog::warn("step at t={} adds {} features at once (limit {}){}", time, added, config_.bulk_growth_limit,
                         config_.split_bulk_growth ? "; training in sub-steps" : "");
            if (config_.split_bulk_growth) {
                widths.clear();
                for (std::size_t w = old_width + config_.bulk_growth_limit; w < width; w += config_.bulk_growth_limit) {
                    widths.push_back(w);
                }
                widths.push_back(width);
            }
        }
        std::vector<ArmRow> rows;
        for (const std::size_t w : widths) {
            const std::size_t pretrained = growing_->features_count();
            extend_input_layer(*growing_, w, time);
            TrainResult r;
            if (w == width) {
                r = train_growing(std::move(*growing_), pretrained, split, train_config);
            } else {
                const TrainTestSplit partial{truncate_columns(split.train, w), truncate_columns(split.test, w),
                                             split.stratified};
                r = train_growing(std::move(*growing_), pretrained, partial, train_config);
            }
            growing_ = std::move(r.state);
            rows.push_back(make_row(time, w, kGrowingArm, r.outcome));
        }
        return rows;
    }

    const RunConfig& config_;
    std::deque<std::vector<TaskConstraintSet>> history_;
    std::optional<ModelState> growing_;
    RunManifest manifest_;
};

std::vector<TraceEvent> load_events(const RunConfig& config) {
    if (!config.trace_path) return generate_events(config.trace);
    std::ifstream in(*config.trace_path);
    if (!in) throw std::runtime_error("cannot open trace " + config.trace_path->string());
    return parse_events(in);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

RunManifest run_simulation(const RunConfig& config) {
    config.validate();
    const auto events = load_events(config);

    FeatureRegistry registry;
    NodeInventory inventory;
    StepRunner runner(config);
    std::vector<TaskConstraintSet> window;
    std::optional<std::vector<TaskConstraintSet>> closed;  // window awaiting its step
    std::int64_t closed_time = 0;
    bool fired = false;

    auto flush = [&]() {
        if (!closed) return;
        runner.fire(std::move(*closed), closed_time, registry, inventory);
        closed.reset();
        fired = true;
    };

    for (const auto& event : events) {
        // Same-timestamp machine events form one growth batch.
        if (closed && (event.is_task() || event.time_us != closed_time)) flush();
        const std::size_t before = registry.size();
        if (const auto* machine = std::get_if<MachineAttributeEvent>(&event.body)) {
            apply_machine_event(inventory, registry, *machine);
        } else {
            (void)encode_task(std::get<TaskSubmitEvent>(event.body).task, registry);
        }
        if (registry.size() > before && !window.empty() && !closed) {
            closed = std::move(window);
            window.clear();
            closed_time = event.time_us;
        }
        if (const auto* task = std::get_if<TaskSubmitEvent>(&event.body)) window.push_back(task->task);
    }
    flush();
    if (!fired && !window.empty()) {
        runner.fire(std::move(window), events.back().time_us, registry, inventory);
    }

    RunManifest manifest = runner.finish();
    manifest.config_hash = fnv1a_hex(canonical_config(config));
    if (config.arms.growing) manifest.summaries.push_back(summarize(manifest.rows, manifest.modes, kGrowingArm));
    if (config.arms.fully_retrain) {
        manifest.summaries.push_back(summarize(manifest.rows, manifest.modes, kFullyRetrainArm));
    }

    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        manifest.csv_path = config.output_dir / "steps.csv";
        manifest.json_path = config.output_dir / "steps.json";
        manifest.manifest_path = config.output_dir / "manifest.json";
        write_report(manifest.rows, *manifest.csv_path, ReportFormat::Csv);
        write_report(manifest.rows, *manifest.json_path, ReportFormat::Json);
        if (manifest.final_growing_model) {
            manifest.model_path = config.output_dir / "growing_model.json";
            save_state(*manifest.final_growing_model, *manifest.model_path);
        }
        write_text(*manifest.manifest_path, format_manifest(manifest));
    }
    return manifest;
}

std::string format_manifest(const RunManifest& m) {
    nlohmann::ordered_json doc;
    doc["config_hash"] = m.config_hash;
    doc["tool_version"] = m.tool_version;
    doc["reports"] = {{"csv", "steps.csv"}, {"json", "steps.json"}};
    doc["model"] = m.final_growing_model ? nlohmann::ordered_json("growing_model.json") : nlohmann::ordered_json(nullptr);
    doc["steps"] = m.steps;
    doc["skipped_steps"] = m.skipped_steps;
    doc["dropped_unschedulable"] = m.dropped_unschedulable;
    doc["bulk_growth_warnings"] = m.bulk_growth_warnings;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    for (const auto& s : m.summaries) {
        summary[s.arm] = {{"steps", s.steps},
                          {"mean_accuracy", optional_json(s.mean_accuracy)},
                          {"mean_group0_f1", optional_json(s.mean_group0_f1)},
                          {"total_epochs", s.total_epochs},
                          {"failed_steps", s.failed_steps}};
    }
    doc["summary"] = std::move(summary);
    return doc.dump(2) + '\n';
}

}  // namespace growsched
