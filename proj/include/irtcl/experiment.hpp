#ifndef IRTCL_EXPERIMENT_HPP
#define IRTCL_EXPERIMENT_HPP

#include "analysis.hpp"
#include "crowd.hpp"
#include "curriculum.hpp"
#include "formats.hpp"
#include "learner.hpp"
#include "parallel.hpp"
#include "synthetic.hpp"
#include "trainer.hpp"
#include "vi_fitter.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

/**
 * @file experiment.hpp
 * @brief JSON-configured pipeline: task -> crowd -> fit -> training runs -> analysis.
 *
 * Seeds: every stage draws from `derive_seed(root_seed, <stage>, <index>)`. Stage names are
 * "task", "crowd", "fit" and "train" (indexed by the run seed, shared across strategies so
 * strategies are compared on identical splits, probes and initial weights).
 *
 * Every output carries the config hash (a `#` comment line in CSVs, a `config_hash` field in
 * JSON). The hash ignores `output_dir`. Wall-clock timings go to `timing.json` only, so every
 * other file is byte-identical across reruns of the same config.
 */

namespace irtcl {

namespace fs = std::filesystem;

struct TaskSpec {
    /// Synthetic task, used unless `train_file` is set.
    SynthTaskConfig synthetic{};
    std::optional<fs::path> train_file;
    std::optional<fs::path> dev_file;
    std::optional<fs::path> test_file;
    std::size_t n_classes = 2;
};

struct TrainingSpec {
    std::size_t num_epochs = 100;
    double lr = 0.1;
    std::size_t early_stop_patience = 10;
    double dev_fraction = 0.10;
};

struct ExperimentConfig {
    int schema = 1;
    std::uint64_t seed = 0;
    fs::path output_dir = "out";
    TaskSpec task;
    CrowdConfig crowd;
    FitConfig fit;
    LearnerSpec learner{"mlp", 16};
    TrainingSpec training;
    std::vector<CurriculumStrategy> strategies;
    std::vector<std::uint64_t> seeds{1};
    std::size_t histogram_bins = 30;
    /// Canonical JSON of the config, without `output_dir`.
    std::string canonical;

    std::string hash() const {
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical);
        return os.str();
    }
};

namespace detail {

class ConfigReader {
public:
    ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    std::string at_path(const std::string& key) const { return path_ + "/" + key; }

    const json& required(const std::string& key) const {
        if (!j_.contains(key)) {
            throw ConfigError(at_path(key), "missing required field");
        }
        return j_.at(key);
    }

    template<typename T>
    T get(const std::string& key, T fallback) const {
        if (!j_.contains(key)) {
            return fallback;
        }
        return convert<T>(j_.at(key), at_path(key));
    }

    template<typename T>
    T need(const std::string& key) const {
        return convert<T>(required(key), at_path(key));
    }

    ConfigReader child(const std::string& key) const { return ConfigReader(required(key), at_path(key)); }

    template<typename T>
    static T convert(const json& v, const std::string& path) {
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_integer() || v.get<long long>() < 0) {
                    throw ConfigError(path, "expected a non-negative integer");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) {
                    throw ConfigError(path, "expected a number");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) {
                    throw ConfigError(path, "expected a string");
                }
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path, e.what());
        }
    }

private:
    const json& j_;
    std::string path_;
};

inline CurriculumStrategy parse_strategy(const ConfigReader& r) {
    CurriculumStrategy s;
    const auto name = r.need<std::string>("strategy");
    const auto kind = parse_strategy_kind(name);
    if (!kind) {
        throw ConfigError(r.at_path("strategy"), "unknown strategy '" + name + "' (expected ddaclae, cb-linear, cb-root or full)");
    }
    s.kind = *kind;
    const auto src = r.get<std::string>("difficulty_source", "learned");
    const auto parsed = parse_difficulty_source(src);
    if (!parsed) {
        throw ConfigError(r.at_path("difficulty_source"), "unknown difficulty source '" + src + "' (expected learned or length)");
    }
    s.difficulty_source = *parsed;
    s.c0 = r.get<double>("c0", 0.01);
    s.probe_size = r.get<std::size_t>("probe_size", 1000);
    if (r.has("T")) {
        s.T = r.get<std::size_t>("T", 1);
    }
    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(r.at_path("strategy"), e.what());
    }
    return s;
}

template<typename F>
void validate_as_config(const std::string& path, F&& f) {
    try {
        f();
    } catch (const InvalidArgument& e) {
        throw ConfigError(path, e.what());
    }
}

} // namespace detail

/// Parse and validate. Field errors are reported as `ConfigError` with a JSON-pointer path.
inline ExperimentConfig parse_experiment_config(const json& root) {
    using detail::ConfigReader;
    ConfigReader r(root, "");
    ExperimentConfig cfg;
    cfg.schema = r.need<int>("schema");
    if (cfg.schema != 1) {
        throw ConfigError("/schema", "unsupported schema version " + std::to_string(cfg.schema));
    }
    cfg.seed = r.get<std::uint64_t>("seed", 0);
    cfg.output_dir = r.need<std::string>("output_dir");

    {
        auto t = r.child("task");
        if (t.has("train_file")) {
            cfg.task.train_file = t.need<std::string>("train_file");
            cfg.task.test_file = t.need<std::string>("test_file");
            if (t.has("dev_file")) {
                cfg.task.dev_file = t.need<std::string>("dev_file");
            }
            cfg.task.n_classes = t.get<std::size_t>("n_classes", 2);
        } else {
            auto& s = cfg.task.synthetic;
            s.n_train = t.get<std::size_t>("n_train", s.n_train);
            s.n_dev = t.get<std::size_t>("n_dev", s.n_dev);
            s.n_test = t.get<std::size_t>("n_test", s.n_test);
            s.n_features = t.get<std::size_t>("n_features", s.n_features);
            s.n_classes = t.get<std::size_t>("n_classes", s.n_classes);
            s.margin_decay = t.get<double>("margin_decay", s.margin_decay);
            s.noise_rate = t.get<double>("noise_rate", s.noise_rate);
            s.seed = derive_seed(cfg.seed, "task");
            detail::validate_as_config("/task", [&] { s.validate(); });
        }
    }

    if (r.has("crowd")) {
        auto c = r.child("crowd");
        auto& cc = cfg.crowd;
        cc.ensemble_size = c.get<std::size_t>("ensemble_size", cc.ensemble_size);
        if (c.has("subsample_fractions")) {
            cc.subsample_fractions = c.get<std::vector<double>>("subsample_fractions", {});
        }
        if (c.has("flip_prob_range")) {
            const auto v = c.get<std::vector<double>>("flip_prob_range", {});
            if (v.size() != 2) {
                throw ConfigError("/crowd/flip_prob_range", "expected [lo, hi]");
            }
            cc.flip_prob_range = {v[0], v[1]};
        }
        if (c.has("flip_probs")) {
            cc.flip_probs = c.get<std::vector<double>>("flip_probs", {});
        }
        cc.learner.kind = c.get<std::string>("learner", cc.learner.kind);
        cc.learner.hidden = c.get<std::size_t>("hidden", cc.learner.hidden);
        cc.epochs = c.get<std::size_t>("epochs", cc.epochs);
        cc.lr = c.get<double>("lr", cc.lr);
    }
    cfg.crowd.seed = derive_seed(cfg.seed, "crowd");
    detail::validate_as_config("/crowd", [&] { cfg.crowd.validate(); });

    if (r.has("fit")) {
        auto f = r.child("fit");
        auto& fc = cfg.fit;
        fc.max_iterations = f.get<std::size_t>("max_iterations", fc.max_iterations);
        fc.learning_rate = f.get<double>("learning_rate", fc.learning_rate);
        fc.mc_samples = f.get<std::size_t>("mc_samples", fc.mc_samples);
        fc.convergence_tol = f.get<double>("convergence_tol", fc.convergence_tol);
    }
    cfg.fit.seed = derive_seed(cfg.seed, "fit");
    detail::validate_as_config("/fit", [&] { cfg.fit.validate(); });

    if (r.has("learner")) {
        auto l = r.child("learner");
        cfg.learner.kind = l.get<std::string>("kind", cfg.learner.kind);
        cfg.learner.hidden = l.get<std::size_t>("hidden", cfg.learner.hidden);
    }
    for (const auto* kind : {&cfg.learner.kind, &cfg.crowd.learner.kind}) {
        if (*kind != "logistic" && *kind != "mlp") {
            throw ConfigError(kind == &cfg.learner.kind ? "/learner/kind" : "/crowd/learner", "unknown learner '" + *kind + "'");
        }
    }

    if (r.has("training")) {
        auto t = r.child("training");
        auto& ts = cfg.training;
        ts.num_epochs = t.get<std::size_t>("num_epochs", ts.num_epochs);
        ts.lr = t.get<double>("lr", ts.lr);
        ts.early_stop_patience = t.get<std::size_t>("early_stop_patience", ts.early_stop_patience);
        ts.dev_fraction = t.get<double>("dev_fraction", ts.dev_fraction);
    }

    const auto& strategies = r.required("strategies");
    if (!strategies.is_array() || strategies.empty()) {
        throw ConfigError("/strategies", "expected a non-empty array");
    }
    for (std::size_t k = 0; k < strategies.size(); ++k) {
        cfg.strategies.push_back(detail::parse_strategy(ConfigReader(strategies[k], "/strategies/" + std::to_string(k))));
    }
    cfg.seeds = r.get<std::vector<std::uint64_t>>("seeds", cfg.seeds);
    if (cfg.seeds.empty()) {
        throw ConfigError("/seeds", "expected at least one seed");
    }
    if (r.has("analysis")) {
        cfg.histogram_bins = r.child("analysis").get<std::size_t>("bins", cfg.histogram_bins);
    }

    TrainConfig probe;
    probe.num_epochs = cfg.training.num_epochs;
    probe.lr = cfg.training.lr;
    probe.early_stop_patience = cfg.training.early_stop_patience;
    probe.dev_fraction = cfg.training.dev_fraction;
    detail::validate_as_config("/training", [&] { probe.validate(); });

    json canonical = root;
    canonical.erase("output_dir");
    cfg.canonical = canonical.dump();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw ConfigError("/", "cannot open config " + p.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("/", std::string("invalid JSON: ") + e.what());
    }
    return parse_experiment_config(j);
}

/// Run-level seed shared by every strategy for run seed `s`.
inline std::uint64_t run_seed(const ExperimentConfig& cfg, std::uint64_t s) { return derive_seed(cfg.seed, "train", s); }

inline TrainConfig make_train_config(const ExperimentConfig& cfg, const CurriculumStrategy& strategy, std::uint64_t s) {
    TrainConfig tc;
    tc.num_epochs = cfg.training.num_epochs;
    tc.lr = cfg.training.lr;
    tc.early_stop_patience = cfg.training.early_stop_patience;
    tc.dev_fraction = cfg.training.dev_fraction;
    tc.seed = run_seed(cfg, s);
    tc.strategy = strategy;
    return tc;
}

/// File-name-safe form of a strategy label, e.g. "cb-root_learned".
inline std::string strategy_slug(const CurriculumStrategy& s) {
    std::string out;
    for (char c : s.label()) {
        if (c == '(') {
            out += '_';
        } else if (c != ')') {
            out += c;
        }
    }
    return out;
}

// ---- runs table ----

struct RunsTableRow {
    std::string strategy;
    RunSummary test_acc;
    RunSummary epochs;
    std::size_t runs = 0;
};

inline std::string mean_ci(const RunSummary& s, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << s.mean << " [±" << s.ci95 << "]";
    return os.str();
}

/// Group TrainResult JSON documents by strategy (first-appearance order) and summarize.
inline std::vector<RunsTableRow> runs_table(const std::vector<json>& results) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : results) {
        const auto name = r.at("strategy").get<std::string>();
        if (!groups.contains(name)) {
            order.push_back(name);
        }
        auto& g = groups[name];
        g.first.push_back(r.at("test_acc").get<double>());
        g.second.push_back(static_cast<double>(r.at("convergence_epoch").get<std::size_t>()));
    }
    std::vector<RunsTableRow> rows;
    for (const auto& name : order) {
        const auto& [acc, ep] = groups[name];
        RunsTableRow row;
        row.strategy = name;
        row.runs = acc.size();
        if (acc.size() >= 2) {
            row.test_acc = summarize_runs(acc);
            row.epochs = summarize_runs(ep);
        } else {
            row.test_acc = {acc[0], 0.0, 1};
            row.epochs = {ep[0], 0.0, 1};
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::string runs_table_markdown(const std::vector<RunsTableRow>& rows) {
    std::ostringstream os;
    os << "| strategy | runs | test accuracy | epochs to convergence |\n";
    os << "|---|---|---|---|\n";
    for (const auto& r : rows) {
        os << "| " << r.strategy << " | " << r.runs << " | " << mean_ci(r.test_acc, 4) << " | " << mean_ci(r.epochs, 2) << " |\n";
    }
    return os.str();
}

inline void write_runs_table_csv(std::ostream& out, const std::vector<RunsTableRow>& rows, const std::string& comment = {}) {
    write_comment(out, comment);
    out << "strategy,runs,test_acc_mean,test_acc_ci95,epochs_mean,epochs_ci95\n";
    for (const auto& r : rows) {
        out << csv::quote(r.strategy) << ',' << r.runs << ',' << format_double(r.test_acc.mean) << ',' << format_double(r.test_acc.ci95)
            << ',' << format_double(r.epochs.mean) << ',' << format_double(r.epochs.ci95) << '\n';
    }
}

/// TrainResult JSON files in `dir` (non-recursive), sorted by file name.
inline std::vector<json> load_run_results(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<json> out;
    for (const auto& f : files) {
        std::ifstream in(f);
        auto j = json::parse(in);
        if (j.contains("strategy") && j.contains("test_acc")) {
            out.push_back(std::move(j));
        }
    }
    return out;
}

// ---- pipeline ----

struct PipelineOptions {
    bool force = false;
    /// Restrict the train stage to these strategies / seeds (empty = all from the config).
    std::vector<CurriculumStrategy> strategies;
    std::vector<std::uint64_t> seeds;
    bool run_analysis = true;
    std::function<void(const std::string&)> log;
};

struct PipelineSummary {
    std::vector<std::string> stages_run;
    std::vector<std::string> stages_skipped;
    std::vector<RunsTableRow> table;
};

class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, PipelineOptions opt) : cfg_(std::move(cfg)), opt_(std::move(opt)), hash_(cfg_.hash()) {}

    const fs::path& out() const { return cfg_.output_dir; }
    std::string comment() const { return "config_hash: " + hash_; }

    PipelineSummary run() {
        fs::create_directories(out());
        stage_task();
        if (needs_learned()) {
            stage_crowd();
            stage_fit();
        }
        stage_heuristic();
        stage_train();
        if (opt_.run_analysis) {
            stage_analysis();
        }
        write_timing();
        return summary_;
    }

private:
    bool needs_learned() const {
        for (const auto& s : selected_strategies()) {
            if (s.kind == StrategyKind::DDaCLAE || ((s.kind == StrategyKind::CBLinear || s.kind == StrategyKind::CBRoot) &&
                                                    s.difficulty_source == DifficultySource::Learned)) {
                return true;
            }
        }
        // the analysis tables use learned difficulties too
        return opt_.run_analysis;
    }

    std::vector<CurriculumStrategy> selected_strategies() const { return opt_.strategies.empty() ? cfg_.strategies : opt_.strategies; }
    std::vector<std::uint64_t> selected_seeds() const { return opt_.seeds.empty() ? cfg_.seeds : opt_.seeds; }

    fs::path marker(const std::string& stage) const { return out() / ".stages" / (stage + ".done"); }

    bool done(const std::string& stage) const {
        if (opt_.force) {
            return false;
        }
        std::ifstream in(marker(stage));
        std::string h;
        return in && std::getline(in, h) && h == hash_;
    }

    void mark(const std::string& stage) {
        auto o = open_output(marker(stage));
        o << hash_ << '\n';
    }

    template<typename F>
    void stage(const std::string& name, F&& body) {
        if (done(name)) {
            summary_.stages_skipped.push_back(name);
            log("skip " + name + " (up to date)");
            return;
        }
        log("run  " + name);
        const auto t0 = std::chrono::steady_clock::now();
        body();
        timing_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        mark(name);
        summary_.stages_run.push_back(name);
    }

    void log(const std::string& msg) const {
        if (opt_.log) {
            opt_.log(msg);
        }
    }

    void write_json(const fs::path& p, json j) const {
        j["config_hash"] = hash_;
        auto o = open_output(p);
        o << j.dump(2) << '\n';
    }

    void stage_task() {
        stage("task", [&] {
            SyntheticTask t;
            if (cfg_.task.train_file) {
                t.train = read_dataset_file(*cfg_.task.train_file, cfg_.task.n_classes);
                t.test = read_dataset_file(*cfg_.task.test_file, cfg_.task.n_classes);
                if (cfg_.task.dev_file) {
                    t.dev = read_dataset_file(*cfg_.task.dev_file, cfg_.task.n_classes);
                }
            } else {
                t = make_synthetic_task(cfg_.task.synthetic);
            }
            write_dataset_file(out() / "task" / "train.csv", t.train, comment());
            if (!t.dev.empty()) {
                write_dataset_file(out() / "task" / "dev.csv", t.dev, comment());
            }
            write_dataset_file(out() / "task" / "test.csv", t.test, comment());
        });
        const auto n_classes = cfg_.task.train_file ? cfg_.task.n_classes : cfg_.task.synthetic.n_classes;
        task_.train = read_dataset_file(out() / "task" / "train.csv", n_classes);
        if (fs::exists(out() / "task" / "dev.csv")) {
            task_.dev = read_dataset_file(out() / "task" / "dev.csv", n_classes);
        }
        task_.test = read_dataset_file(out() / "task" / "test.csv", n_classes);
        const std::size_t k = std::max({task_.train.n_classes, task_.dev.n_classes, task_.test.n_classes});
        task_.train.n_classes = task_.dev.n_classes = task_.test.n_classes = k;
    }

    Dataset all_examples() const {
        Dataset all = task_.train;
        for (const auto* d : {&task_.dev, &task_.test}) {
            if (!d->empty()) {
                all.append(*d);
            }
        }
        return all;
    }

    void stage_crowd() {
        stage("crowd", [&] {
            const auto all = all_examples();
            const auto crowd = generate_crowd(task_.train, all, cfg_.crowd);
            write_response_file(out() / "crowd" / "responses.csv", crowd.responses, comment());
            auto o = open_output(out() / "crowd" / "predictions.csv");
            write_predictions_csv(o, crowd, comment());
            write_json(out() / "crowd" / "manifest.json", crowd_manifest_json(crowd));
        });
    }

    void stage_fit() {
        stage("fit", [&] {
            const auto z = read_response_file(out() / "crowd" / "responses.csv");
            const auto post = fit_1pl(z, cfg_.fit);
            {
                auto o = open_output(out() / "fit" / "difficulty.csv");
                write_difficulty_csv(o, post.item_ids, post.difficulty_mean, comment());
            }
            {
                auto o = open_output(out() / "fit" / "ability.csv");
                write_ability_csv(o, post.model_ids, post.ability_mean, comment());
            }
            write_json(out() / "fit" / "report.json", fit_report_json(post, cfg_.fit));
        });
        const auto nv = read_difficulty_file(out() / "fit" / "difficulty.csv");
        const auto m = nv.map();
        learned_.clear();
        for (const auto& id : task_.train.ids) {
            const auto it = m.find(id);
            if (it == m.end()) {
                throw FormatError("fitted difficulties are missing training item " + id);
            }
            learned_.push_back(it->second);
        }
        difficulty_all_ = nv;
    }

    void stage_heuristic() {
        const auto res = heuristic_difficulty_length(task_.train.text);
        length_ = res.difficulties;
        if (task_.train.text.empty()) {
            length_.assign(task_.train.size(), 0.0);
        }
        auto o = open_output(out() / "heuristic" / "length.csv");
        write_difficulty_csv(o, task_.train.ids, length_, comment());
    }

    void stage_train() {
        struct Job {
            CurriculumStrategy strategy;
            std::uint64_t seed;
            fs::path path;
        };
        std::vector<Job> jobs;
        for (const auto& s : selected_strategies()) {
            for (auto seed : selected_seeds()) {
                jobs.push_back({s, seed, out() / "runs" / (strategy_slug(s) + "__seed" + std::to_string(seed) + ".json")});
            }
        }
        std::vector<std::optional<TrainResult>> results(jobs.size());
        std::vector<bool> skip(jobs.size(), false);
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            skip[k] = !opt_.force && up_to_date(jobs[k].path);
        }
        const auto pending = static_cast<std::size_t>(std::count(skip.begin(), skip.end(), false));
        if (pending == 0) {
            summary_.stages_skipped.push_back("train");
            log("skip train (up to date)");
            return;
        }
        log("run  train (" + std::to_string(pending) + " of " + std::to_string(jobs.size()) + " runs)");
        const auto t0 = std::chrono::steady_clock::now();
        parallel_for(jobs.size(), [&](std::size_t k) {
            if (skip[k]) {
                return;
            }
            const auto& job = jobs[k];
            const auto tc = make_train_config(cfg_, job.strategy, job.seed);
            auto learner = make_learner(cfg_.learner, task_.train.n_features, task_.train.n_classes, derive_seed(tc.seed, "learner"));
            const std::vector<double>* b = nullptr;
            if (job.strategy.kind != StrategyKind::FullySupervised) {
                b = job.strategy.difficulty_source == DifficultySource::Learned ? &learned_ : &length_;
            }
            results[k] = train_with_strategy(*learner, task_.train, b ? std::span<const double>(*b) : std::span<const double>{},
                                             task_.test, tc);
        });
        for (std::size_t k = 0; k < jobs.size(); ++k) {
            if (!results[k]) {
                continue;
            }
            auto j = train_result_json(*results[k]);
            j["run_seed"] = jobs[k].seed;
            write_json(jobs[k].path, j);
            auto trace = jobs[k].path;
            trace.replace_extension(".trace.csv");
            auto o = open_output(trace);
            write_trace_csv(o, *results[k], comment());
            timing_["train/" + jobs[k].path.stem().string()] = results[k]->wall_time_s;
        }
        timing_["train"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        summary_.stages_run.push_back("train");
    }

    bool up_to_date(const fs::path& p) const {
        std::ifstream in(p);
        if (!in) {
            return false;
        }
        try {
            const auto j = json::parse(in);
            return j.value("config_hash", std::string{}) == hash_;
        } catch (...) {
            return false;
        }
    }

    void stage_analysis() {
        log("run  analysis");
        // runs table over every configured (strategy, seed)
        std::vector<json> results;
        for (const auto& s : cfg_.strategies) {
            for (auto seed : cfg_.seeds) {
                const auto p = out() / "runs" / (strategy_slug(s) + "__seed" + std::to_string(seed) + ".json");
                if (fs::exists(p)) {
                    std::ifstream in(p);
                    results.push_back(json::parse(in));
                }
            }
        }
        summary_.table = runs_table(results);
        {
            auto o = open_output(out() / "analysis" / "runs_table.csv");
            write_runs_table_csv(o, summary_.table, comment());
        }
        {
            auto o = open_output(out() / "analysis" / "runs_table.md");
            o << "<!-- " << comment() << " -->\n" << runs_table_markdown(summary_.table);
        }

        json corr;
        auto safe_rho = [](std::span<const double> a, std::span<const double> b) -> json {
            try {
                return spearman(a, b);
            } catch (const UndefinedCorrelation&) {
                return nullptr;
            }
        };
        corr["learned_vs_length"] = safe_rho(learned_, length_);
        if (!task_.train.planted_margin.empty()) {
            const auto all = all_examples();
            if (!all.planted_margin.empty()) {
                const auto m = difficulty_all_.map();
                std::vector<double> b;
                for (const auto& id : all.ids) {
                    b.push_back(m.at(id));
                }
                corr["learned_vs_planted_margin"] = safe_rho(b, all.planted_margin);
            }
        }
        write_json(out() / "analysis" / "correlation.json", corr);

        const auto hist = difficulty_histogram(difficulty_all_.values, cfg_.histogram_bins);
        auto o = open_output(out() / "analysis" / "difficulty_hist.csv");
        write_histogram_csv(o, hist, comment());
        summary_.stages_run.push_back("analysis");
    }

public:
    static void write_histogram_csv(std::ostream& o, const Histogram& h, const std::string& comment = {}) {
        write_comment(o, comment);
        o << "bin_lo,bin_hi,percent\n";
        for (std::size_t b = 0; b < h.percent.size(); ++b) {
            o << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]) << ',' << format_double(h.percent[b]) << '\n';
        }
    }

private:
    void write_timing() const {
        json t(timing_);
        auto o = open_output(out() / "timing.json");
        o << t.dump(2) << '\n';
    }

    ExperimentConfig cfg_;
    PipelineOptions opt_;
    std::string hash_;
    SyntheticTask task_;
    std::vector<double> learned_;
    std::vector<double> length_;
    NamedValues difficulty_all_;
    std::map<std::string, double> timing_;
    PipelineSummary summary_;
};

inline PipelineSummary run_experiment(const ExperimentConfig& cfg, PipelineOptions opt = {}) {
    return Pipeline(cfg, std::move(opt)).run();
}

} // namespace irtcl

#endif
