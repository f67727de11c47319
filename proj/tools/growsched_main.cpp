// growsched command-line driver.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training failed.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "growsched/evalkit.hpp"
#include "growsched/growing.hpp"
#include "growsched/pipeline.hpp"
#include "growsched/schedsim.hpp"
#include "growsched/trace.hpp"

namespace gs = growsched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTrainingFailed = 3;

/// Invalid option values found after parsing; reported like parse errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceOptions {
    std::size_t nodes = 200;
    std::size_t attributes = 6;
    std::size_t values = 10;
    std::size_t tasks = 40000;
    std::size_t growth_steps = gs::kDeskGrowthSteps;
    std::size_t values_per_step = gs::kDeskValuesPerStep;
    double constrained_fraction = 0.4;
    double restrictive_rate = 15.0;
    double mean_duration_s = 60.0;
    double span_days = 20.0;
    std::uint64_t seed = 1;
};

void add_trace_options(CLI::App* app, TraceOptions& o) {
    app->add_option("--nodes", o.nodes, "Cluster size")->capture_default_str();
    app->add_option("--attributes", o.attributes, "Machine attributes besides HOST")->capture_default_str();
    app->add_option("--values", o.values, "Initial values per attribute")->capture_default_str();
    app->add_option("--tasks", o.tasks, "Task submissions")->capture_default_str();
    app->add_option("--growth-steps", o.growth_steps, "Evenly spaced growth injections")->capture_default_str();
    app->add_option("--values-per-step", o.values_per_step, "New values per injection")->capture_default_str();
    app->add_option("--constrained-fraction", o.constrained_fraction)->capture_default_str();
    app->add_option("--restrictive-rate", o.restrictive_rate, "Single-node tasks per 10,000")->capture_default_str();
    app->add_option("--mean-duration-s", o.mean_duration_s)->capture_default_str();
    app->add_option("--span-days", o.span_days)->capture_default_str();
    app->add_option("--seed", o.seed)->capture_default_str();
}

gs::SyntheticTraceConfig to_trace_config(const TraceOptions& o) {
    gs::SyntheticTraceConfig c;
    c.node_count = o.nodes;
    c.attribute_count = o.attributes;
    c.values_per_attribute = o.values;
    c.task_count = o.tasks;
    c.constrained_fraction = o.constrained_fraction;
    c.restrictive_rate = o.restrictive_rate;
    c.mean_duration_us = o.mean_duration_s * 1e6;
    c.span_us = static_cast<std::int64_t>(std::llround(o.span_days * 86400.0 * 1e6));
    c.seed = o.seed;
    if (o.growth_steps > 0) c.growth_schedule = gs::even_growth_schedule(o.growth_steps, o.values_per_step, c.span_us);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

struct TrainOptions {
    double learning_rate = 0.05;
    double group0_weight = 200.0;
    double pretrained_rate = 0.1;
    std::size_t epochs_limit = 100;
    std::size_t max_attempts = 10;
    std::size_t batch_size = 64;
    double accepted_accuracy = 0.95;
    double accepted_group0_f1 = 0.9;
    std::string activation = "identity";
    std::size_t increment = gs::kDeskIncrement;
    double test_fraction = 0.25;
};

void add_train_options(CLI::App* app, TrainOptions& o) {
    app->add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--group0-weight", o.group0_weight)->capture_default_str();
    app->add_option("--pretrained-rate", o.pretrained_rate, "Gradient multiplier on pretrained columns")
        ->capture_default_str();
    app->add_option("--epochs-limit", o.epochs_limit)->capture_default_str();
    app->add_option("--max-attempts", o.max_attempts)->capture_default_str();
    app->add_option("--batch-size", o.batch_size)->capture_default_str();
    app->add_option("--accepted-accuracy", o.accepted_accuracy)->capture_default_str();
    app->add_option("--accepted-group0-f1", o.accepted_group0_f1)->capture_default_str();
    app->add_option("--activation", o.activation)
        ->check(CLI::IsMember({"identity", "relu"}))
        ->capture_default_str();
    app->add_option("--increment", o.increment, "Suitable-node count per group")->capture_default_str();
    app->add_option("--test-fraction", o.test_fraction)->capture_default_str();
}

gs::TrainConfig to_train_config(const TrainOptions& o, std::uint64_t seed) {
    gs::TrainConfig c;
    c.learning_rate = o.learning_rate;
    c.group0_weight = o.group0_weight;
    c.pretrained_gradient_rate = o.pretrained_rate;
    c.epochs_limit = o.epochs_limit;
    c.max_attempts = o.max_attempts;
    c.batch_size = o.batch_size;
    c.accepted_accuracy = o.accepted_accuracy;
    c.accepted_group0_f1 = o.accepted_group0_f1;
    c.activation = o.activation == "relu" ? gs::Activation::Relu : gs::Activation::Identity;
    c.seed = seed;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

std::vector<gs::TraceEvent> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace " + path);
    return gs::parse_events(in);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path);
}

/// Replays every event of a trace and labels all its tasks against the final
/// registry and inventory.
gs::DatasetSnapshot snapshot_from_trace(const std::vector<gs::TraceEvent>& events, const gs::GroupingConfig& grouping) {
    gs::FeatureRegistry registry;
    gs::NodeInventory inventory;
    std::vector<gs::TaskConstraintSet> tasks;
    for (const auto& e : events) {
        if (const auto* m = std::get_if<gs::MachineAttributeEvent>(&e.body)) {
            gs::apply_machine_event(inventory, registry, *m);
        } else {
            tasks.push_back(std::get<gs::TaskSubmitEvent>(e.body).task);
        }
    }
    const std::int64_t t = events.empty() ? 0 : events.back().time_us;
    auto built = gs::build_snapshot(tasks, registry, inventory, grouping, t);
    return std::move(built.snapshot);
}

gs::DatasetSnapshot read_snapshot_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open snapshot " + path);
    return gs::read_snapshot(in);
}

double l2_norm(std::span<const double> values) {
    double total = 0.0;
    for (double v : values) total += v * v;
    return std::sqrt(total);
}

nlohmann::ordered_json metrics_json(const gs::Metrics& m) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json doc;
    doc["accuracy"] = m.accuracy;
    doc["total"] = m.total;
    doc["group0_f1"] = opt(m.group0_f1());
    doc["macro_f1"] = opt(m.macro_f1);
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < gs::kClassCount; ++c) {
        classes.push_back({{"group", c},
                           {"support", m.support[c]},
                           {"precision", opt(m.precision[c])},
                           {"recall", opt(m.recall[c])},
                           {"f1", opt(m.f1[c])}});
    }
    doc["classes"] = std::move(classes);
    nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
    for (const auto& row : m.confusion) confusion.push_back(row);
    doc["confusion"] = std::move(confusion);
    return doc;
}

/// Config files hold `key = value` lines, where keys are long option names
/// without the leading dashes. Blank lines, `#`/`;` comments and `[section]`
/// headers are ignored. Entries are spliced in right after the subcommand
/// name so that explicit flags, which come later, take precedence.
std::vector<std::string> expand_config(int argc, char** argv, const std::vector<std::string>& subcommands) {
    std::vector<std::string> args(argv, argv + argc);
    auto sub = std::find_if(args.begin() + 1, args.end(), [&](const std::string& a) {
        return std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end();
    });
    if (sub == args.end()) return args;

    std::string path;
    for (auto it = sub + 1; it != args.end(); ++it) {
        if (*it == "--config" && it + 1 != args.end()) path = *(it + 1);
        if (it->rfind("--config=", 0) == 0) path = it->substr(9);
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    auto trim = [](std::string t) {
        const auto b = t.find_first_not_of(" \t\r");
        const auto e = t.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : t.substr(b, e - b + 1);
    };
    std::vector<std::string> injected;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        while (!key.empty() && key[0] == '-') key.erase(0, 1);
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty() || key == "config") continue;
        injected.push_back("--" + key + "=" + value);
    }
    args.insert(sub + 1, injected.begin(), injected.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Growing-input task-constraint classifier toolkit"};
    app.set_version_flag("--version", std::string(gs::kToolVersion));
    app.require_subcommand(1);
    // Config entries precede explicit flags, so the last occurrence wins.
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    std::string config_path;  // consumed by expand_config before parsing
    auto with_config = [&config_path](CLI::App* sub) {
        sub->add_option("--config", config_path, "Key-value config file; command-line flags override it");
        return sub;
    };

    // gen-trace
    auto* gen = with_config(app.add_subcommand("gen-trace", "Write a synthetic JSONL trace"));
    TraceOptions gen_trace;
    std::string gen_out;
    bool gen_burst = false;
    gs::BurstTraceConfig burst;
    add_trace_options(gen, gen_trace);
    gen->add_option("--out", gen_out, "Output JSONL path")->required();
    gen->add_flag("--burst", gen_burst, "Scheduler stress trace instead of the growth trace");
    gen->add_option("--bursts", burst.bursts)->capture_default_str();
    gen->add_option("--burst-size", burst.burst_size)->capture_default_str();
    gen->add_option("--burst-nodes", burst.node_count)->capture_default_str();

    // simulate
    auto* sim = with_config(app.add_subcommand("simulate", "Replay a trace and train both arms at every growth step"));
    TraceOptions sim_trace;
    TrainOptions sim_train;
    std::string sim_trace_path;
    std::string sim_out;
    std::string sim_arms = "growing,fully_retrain";
    std::size_t sim_history = 3;
    bool sim_split_bulk = false;
    bool sim_parallel = false;
    add_trace_options(sim, sim_trace);
    add_train_options(sim, sim_train);
    sim->add_option("--trace", sim_trace_path, "Replay this trace instead of generating one");
    sim->add_option("--out", sim_out, "Output directory")->required();
    sim->add_option("--arms", sim_arms, "Comma-separated: growing, fully_retrain")->capture_default_str();
    sim->add_option("--history", sim_history, "Earlier windows merged into each snapshot")->capture_default_str();
    sim->add_flag("--split-bulk-growth", sim_split_bulk, "Train growth above 40 features in sub-steps");
    sim->add_flag("--parallel-arms", sim_parallel, "Train the two arms concurrently");

    // train
    auto* train = with_config(app.add_subcommand("train", "Train (or grow) a model on one snapshot"));
    TrainOptions train_opts;
    std::string train_data;
    std::string train_trace;
    std::string train_model;
    std::string train_out;
    std::string train_snapshot_out;
    std::uint64_t train_seed = 1;
    add_train_options(train, train_opts);
    auto* data_opt = train->add_option("--data", train_data, "Snapshot JSON");
    auto* trace_opt = train->add_option("--trace", train_trace, "Build the snapshot from a whole trace");
    data_opt->excludes(trace_opt);
    train->add_option("--model", train_model, "Existing model to extend and fine-tune");
    train->add_option("--out", train_out, "Where to save the trained model")->required();
    train->add_option("--snapshot-out", train_snapshot_out, "Also save the snapshot built from --trace");
    train->add_option("--seed", train_seed)->capture_default_str();

    // evaluate
    auto* eval = with_config(app.add_subcommand("evaluate", "Score a model on a snapshot"));
    std::string eval_model;
    std::string eval_data;
    std::string eval_out;
    eval->add_option("--model", eval_model)->required();
    eval->add_option("--data", eval_data, "Snapshot JSON")->required();
    eval->add_option("--out", eval_out, "Metrics JSON (stdout when omitted)");

    // sched-sim
    auto* sched = with_config(app.add_subcommand("sched-sim", "Compare queueing policies on a trace"));
    std::string sched_trace;
    std::string sched_policy = "fifo";
    std::string sched_model;
    bool sched_oracle = false;
    std::string sched_out;
    std::string sched_queue_trace;
    gs::SchedulerConfig sched_config;
    sched->add_option("--trace", sched_trace)->required();
    sched->add_option("--policy", sched_policy)->check(CLI::IsMember({"fifo", "co-analyzer"}))->capture_default_str();
    auto* model_opt = sched->add_option("--model", sched_model, "Classifier model for co-analyzer");
    auto* oracle_opt = sched->add_flag("--oracle", sched_oracle, "Use perfect predictions");
    model_opt->excludes(oracle_opt);
    sched->add_option("--out", sched_out, "Result JSON (stdout when omitted)");
    sched->add_option("--queue-trace", sched_queue_trace, "Per-tick queue CSV");
    sched->add_option("--threshold", sched_config.priority_threshold)->capture_default_str();
    sched->add_option("--slots", sched_config.slots_per_node)->capture_default_str();
    sched->add_option("--dispatch-rate", sched_config.dispatch_rate)->capture_default_str();
    sched->add_option("--tick-us", sched_config.tick_us)->capture_default_str();
    sched->add_option("--increment", sched_config.grouping.increment)->capture_default_str();

    // inspect-model
    auto* inspect = with_config(app.add_subcommand("inspect-model", "Print model dimensions and history"));
    std::string inspect_model;
    inspect->add_option("--model", inspect_model)->required();

    try {
        std::vector<std::string> names;
        for (const auto* sub : app.get_subcommands({})) names.push_back(sub->get_name());
        auto args = expand_config(argc, argv, names);
        std::vector<char*> raw;
        for (auto& a : args) raw.push_back(a.data());
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (gen->parsed()) {
            std::ofstream out(gen_out, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot open " + gen_out);
            if (gen_burst) {
                burst.seed = gen_trace.seed;
                gs::write_events(gs::generate_burst_events(burst), out);
            } else {
                out << gs::generate_trace(to_trace_config(gen_trace));
            }
            return kExitOk;
        }

        if (sim->parsed()) {
            gs::RunConfig config;
            config.trace = to_trace_config(sim_trace);
            if (!sim_trace_path.empty()) config.trace_path = sim_trace_path;
            config.grouping.increment = sim_train.increment;
            config.train = to_train_config(sim_train, sim_trace.seed);
            config.split.test_fraction = sim_train.test_fraction;
            config.history_windows = sim_history;
            config.split_bulk_growth = sim_split_bulk;
            config.parallel_arms = sim_parallel;
            config.seed = sim_trace.seed;
            config.output_dir = sim_out;
            try {
                config.arms = gs::parse_arms(sim_arms);
                if (!config.trace_path) config.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const auto manifest = gs::run_simulation(config);
            std::cout << gs::format_manifest(manifest);
            return manifest.any_failed() ? kExitTrainingFailed : kExitOk;
        }

        if (train->parsed()) {
            if (train_data.empty() == train_trace.empty()) throw UsageError("exactly one of --data or --trace is required");
            const gs::GroupingConfig grouping{train_opts.increment};
            const gs::DatasetSnapshot data =
                train_data.empty() ? snapshot_from_trace(read_trace(train_trace), grouping) : read_snapshot_file(train_data);
            if (!train_snapshot_out.empty()) {
                std::ofstream out(train_snapshot_out, std::ios::binary | std::ios::trunc);
                if (!out) throw std::runtime_error("cannot open " + train_snapshot_out);
                gs::write_snapshot(data, out);
            }
            const auto config = to_train_config(train_opts, train_seed);
            gs::SplitConfig split_config;
            split_config.test_fraction = train_opts.test_fraction;
            split_config.seed = train_seed;
            const auto split = gs::stratified_split(data, split_config);
            gs::TrainResult result;
            if (train_model.empty()) {
                result = gs::train_full(data.features_count, split, config);
            } else {
                auto state = gs::load_state(train_model);
                const std::size_t pretrained = state.features_count();
                gs::extend_input_layer(state, data.features_count, data.step_time_us);
                result = gs::train_growing(std::move(state), pretrained, split, config);
            }
            gs::save_state(result.state, train_out);
            const auto& o = result.outcome;
            std::cout << "mode=" << gs::to_string(o.mode) << " epochs=" << o.epochs_used
                      << " attempts=" << o.attempts_used << " accuracy=" << gs::format_double(o.accuracy)
                      << " group0_f1=" << (o.group0_f1 ? gs::format_double(*o.group0_f1) : "n/a") << '\n';
            return o.mode == gs::TrainMode::Failed ? kExitTrainingFailed : kExitOk;
        }

        if (eval->parsed()) {
            const auto state = gs::load_state(eval_model);
            auto data = read_snapshot_file(eval_data);
            if (data.features_count < state.features_count()) {
                // Older snapshot: its columns are a prefix of the model's.
                for (auto& row : data.x) row.resize(state.features_count());
                data.features_count = state.features_count();
            }
            const auto metrics = gs::evaluate(state.model, data);
            const std::string text = metrics_json(metrics).dump(2) + '\n';
            if (eval_out.empty()) {
                std::cout << text;
            } else {
                write_file(eval_out, text);
            }
            return kExitOk;
        }

        if (sched->parsed()) {
            sched_config.policy = gs::parse_policy(sched_policy);
            try {
                sched_config.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            std::shared_ptr<const gs::TaskClassifier> classifier;
            if (sched_oracle) {
                classifier = std::make_shared<gs::OracleClassifier>(sched_config.grouping);
            } else if (!sched_model.empty()) {
                classifier = std::make_shared<gs::ModelClassifier>(gs::load_state(sched_model).model);
            } else if (sched_config.policy == gs::SchedulerPolicy::CoAnalyzer) {
                throw UsageError("co-analyzer needs --model or --oracle");
            }
            const auto events = read_trace(sched_trace);
            const auto result = gs::simulate(events, classifier, sched_config);
            const std::string text = gs::format_sim_result(result);
            if (sched_out.empty()) {
                std::cout << text;
            } else {
                write_file(sched_out, text);
            }
            if (!sched_queue_trace.empty()) write_file(sched_queue_trace, gs::format_queue_trace_csv(result));
            return kExitOk;
        }

        if (inspect->parsed()) {
            const auto state = gs::load_state(inspect_model);
            const auto& m = state.model;
            std::cout << "format_version: " << gs::kModelFormatVersion << '\n'
                      << "features_count: " << m.features_count() << '\n'
                      << "hidden: " << m.hidden.outputs() << '\n'
                      << "classes: " << m.output.outputs() << '\n'
                      << "activation: " << (m.activation == gs::Activation::Relu ? "relu" : "identity") << '\n'
                      << "seed: " << state.seed << '\n'
                      << "weight_norms:\n"
                      << "  hidden.weights: " << gs::format_double(l2_norm(m.hidden.weights.values())) << '\n'
                      << "  hidden.bias: " << gs::format_double(l2_norm(m.hidden.bias)) << '\n'
                      << "  output.weights: " << gs::format_double(l2_norm(m.output.weights.values())) << '\n'
                      << "  output.bias: " << gs::format_double(l2_norm(m.output.bias)) << '\n'
                      << "extension_history: " << state.history.size() << " entries\n";
            for (const auto& e : state.history) {
                std::cout << "  t=" << e.step_time_us << ' ' << e.old_count << " -> " << e.new_count << '\n';
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
