// Command-line front end: fit, score, crowd generate, train, analyze, run.

#include <irtcl/ability.hpp>
#include <irtcl/analysis.hpp>
#include <irtcl/crowd.hpp>
#include <irtcl/experiment.hpp>
#include <irtcl/formats.hpp>
#include <irtcl/vi_fitter.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using namespace irtcl;

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

/// Bad command-line values are reported like config errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void print_warnings(const std::vector<std::string>& warnings) {
    constexpr std::size_t shown = 5;
    for (std::size_t k = 0; k < std::min(shown, warnings.size()); ++k) {
        std::cerr << "warning: " << warnings[k] << '\n';
    }
    if (warnings.size() > shown) {
        std::cerr << "warning: ... and " << warnings.size() - shown << " more\n";
    }
}

// ---- fit ----

struct FitArgs {
    fs::path responses;
    fs::path out_dir = ".";
    std::optional<fs::path> difficulties, abilities, report;
    FitConfig cfg;
};

int cmd_fit(const FitArgs& a) {
    const auto z = read_response_file(a.responses);
    const auto post = fit_1pl(z, a.cfg);
    {
        auto o = open_output(a.difficulties.value_or(a.out_dir / "difficulty.csv"));
        write_difficulty_csv(o, post.item_ids, post.difficulty_mean);
    }
    {
        auto o = open_output(a.abilities.value_or(a.out_dir / "ability.csv"));
        write_ability_csv(o, post.model_ids, post.ability_mean);
    }
    auto o = open_output(a.report.value_or(a.out_dir / "fit_report.json"));
    o << fit_report_json(post, a.cfg).dump(2) << '\n';
    print_warnings(post.warnings);
    std::cerr << "fit: " << post.iterations_run << " iterations, final ELBO " << post.final_elbo
              << (post.converged ? "" : " (not converged)") << '\n';
    return 0;
}

// ---- score ----

struct ScoreArgs {
    fs::path difficulties;
    fs::path responses;
    double theta_min = -4.0;
    double theta_max = 4.0;
};

int cmd_score(const ScoreArgs& a) {
    if (!(a.theta_min < a.theta_max)) {
        throw UsageError("--theta-min must be below --theta-max");
    }
    const auto b = read_difficulty_file(a.difficulties).map();
    auto in = open_input(a.responses);
    const auto [ids, z] = read_graded_csv(in);
    std::vector<double> bs;
    for (const auto& id : ids) {
        const auto it = b.find(id);
        if (it == b.end()) {
            throw FormatError("no difficulty for item " + id);
        }
        bs.push_back(it->second);
    }
    const auto est = estimate_ability(z, bs, AbilityBounds{a.theta_min, a.theta_max});
    std::cout << json{{"theta", est.theta}, {"clamped", est.clamped}, {"n_items", z.size()}}.dump() << '\n';
    return 0;
}

// ---- crowd generate ----

struct CrowdArgs {
    fs::path train;
    std::vector<fs::path> data;
    fs::path out_dir = ".";
    std::string format = "csv";
    std::size_t n_classes = 2;
    CrowdConfig cfg;
};

int cmd_crowd(const CrowdArgs& a) {
    const auto train = read_dataset_file(a.train, a.n_classes);
    Dataset all;
    if (a.data.empty()) {
        all = train;
    } else {
        for (const auto& p : a.data) {
            auto d = read_dataset_file(p, a.n_classes);
            if (all.n_features == 0) {
                all = std::move(d);
            } else {
                all.append(d);
            }
        }
    }
    const std::size_t k = std::max(train.n_classes, all.n_classes);
    auto tr = train;
    tr.n_classes = all.n_classes = k;
    const auto crowd = generate_crowd(tr, all, a.cfg);
    write_response_file(a.out_dir / ("responses." + a.format), crowd.responses);
    {
        auto o = open_output(a.out_dir / "predictions.csv");
        write_predictions_csv(o, crowd);
    }
    auto o = open_output(a.out_dir / "manifest.json");
    o << crowd_manifest_json(crowd).dump(2) << '\n';
    print_warnings(crowd.warnings);
    return 0;
}

// ---- train / run ----

struct PipelineArgs {
    fs::path config;
    std::optional<fs::path> output;
    bool force = false;
    std::string strategy;
    std::string difficulty = "learned";
    std::size_t seeds = 0;
};

ExperimentConfig load_config(const PipelineArgs& a) {
    auto cfg = load_experiment_config(a.config);
    if (a.output) {
        cfg.output_dir = *a.output;
    }
    return cfg;
}

PipelineOptions base_options(const PipelineArgs& a) {
    PipelineOptions opt;
    opt.force = a.force;
    opt.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
    return opt;
}

int cmd_run(const PipelineArgs& a) {
    const auto cfg = load_config(a);
    const auto summary = run_experiment(cfg, base_options(a));
    std::cout << runs_table_markdown(summary.table);
    return 0;
}

int cmd_train(const PipelineArgs& a) {
    const auto cfg = load_config(a);
    auto opt = base_options(a);
    opt.run_analysis = false;
    if (!a.strategy.empty()) {
        json spec{{"strategy", a.strategy}, {"difficulty_source", a.difficulty}};
        // inherit c0 / probe_size from a matching configured strategy
        for (const auto& s : cfg.strategies) {
            if (to_string(s.kind) == a.strategy) {
                spec["c0"] = s.c0;
                spec["probe_size"] = s.probe_size;
                if (s.T) {
                    spec["T"] = *s.T;
                }
                break;
            }
        }
        opt.strategies.push_back(detail::parse_strategy(detail::ConfigReader(spec, "--strategy")));
    }
    if (a.seeds > 0) {
        for (std::size_t k = 0; k < a.seeds; ++k) {
            opt.seeds.push_back(k < cfg.seeds.size() ? cfg.seeds[k] : cfg.seeds.back() + (k - cfg.seeds.size() + 1));
        }
    }
    run_experiment(cfg, opt);
    std::cerr << "results in " << (cfg.output_dir / "runs").string() << '\n';
    return 0;
}

// ---- analyze ----

struct AnalyzeArgs {
    fs::path difficulties;
    fs::path heuristic;
    std::size_t bins = 30;
    fs::path results;
    std::optional<fs::path> out;
    bool csv = false;
};

std::vector<double> aligned_values(const NamedValues& a, const NamedValues& b, std::vector<double>& out_b) {
    const auto mb = b.map();
    std::vector<double> out_a;
    for (std::size_t k = 0; k < a.ids.size(); ++k) {
        const auto it = mb.find(a.ids[k]);
        if (it != mb.end()) {
            out_a.push_back(a.values[k]);
            out_b.push_back(it->second);
        }
    }
    return out_a;
}

int cmd_correlation(const AnalyzeArgs& a) {
    const auto learned = read_difficulty_file(a.difficulties);
    const auto heur = read_difficulty_file(a.heuristic);
    std::vector<double> hb;
    const auto lb = aligned_values(learned, heur, hb);
    if (lb.size() < 2) {
        throw FormatError("fewer than two items shared between the two difficulty files");
    }
    std::cout << json{{"rho", spearman(lb, hb)}, {"n", lb.size()}}.dump() << '\n';
    return 0;
}

int cmd_dist(const AnalyzeArgs& a) {
    const auto b = read_difficulty_file(a.difficulties);
    const auto h = difficulty_histogram(b.values, a.bins);
    if (a.out) {
        auto o = open_output(*a.out);
        Pipeline::write_histogram_csv(o, h);
    } else {
        Pipeline::write_histogram_csv(std::cout, h);
    }
    return 0;
}

int cmd_runs(const AnalyzeArgs& a) {
    const auto rows = runs_table(load_run_results(a.results));
    if (rows.empty()) {
        throw FormatError("no TrainResult JSON files in " + a.results.string());
    }
    if (a.csv) {
        write_runs_table_csv(std::cout, rows);
    } else {
        std::cout << runs_table_markdown(rows);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Item-response-theory difficulty estimation and curriculum training"};
    app.require_subcommand(1);
    std::function<int()> action;

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the 1PL model to a response matrix");
    fit_cmd->add_option("responses", fit.responses, "Response matrix (.csv dense or .jsonl long)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("-o,--out-dir", fit.out_dir, "Directory for difficulty.csv, ability.csv, fit_report.json");
    fit_cmd->add_option("--difficulties", fit.difficulties, "Difficulty CSV path (overrides --out-dir)");
    fit_cmd->add_option("--abilities", fit.abilities, "Ability CSV path (overrides --out-dir)");
    fit_cmd->add_option("--report", fit.report, "Fit report JSON path (overrides --out-dir)");
    fit_cmd->add_option("--seed", fit.cfg.seed, "Random seed");
    fit_cmd->add_option("--max-iterations", fit.cfg.max_iterations, "Iteration cap")->capture_default_str();
    fit_cmd->add_option("--learning-rate", fit.cfg.learning_rate, "Adam step size")->capture_default_str();
    fit_cmd->add_option("--mc-samples", fit.cfg.mc_samples, "Samples per ELBO gradient")->capture_default_str();
    fit_cmd->add_option("--tol", fit.cfg.convergence_tol, "Relative ELBO change for convergence")->capture_default_str();
    fit_cmd->callback([&] { action = [&] { return cmd_fit(fit); }; });

    ScoreArgs score;
    auto* score_cmd = app.add_subcommand("score", "Estimate one model's ability from graded responses");
    score_cmd->add_option("--difficulties", score.difficulties, "Difficulty CSV")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--responses", score.responses, "Graded CSV (item_id,correct)")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--theta-min", score.theta_min, "Lower ability bound")->capture_default_str();
    score_cmd->add_option("--theta-max", score.theta_max, "Upper ability bound")->capture_default_str();
    score_cmd->callback([&] { action = [&] { return cmd_score(score); }; });

    CrowdArgs crowd;
    auto* crowd_cmd = app.add_subcommand("crowd", "Artificial crowds");
    crowd_cmd->require_subcommand(1);
    auto* gen = crowd_cmd->add_subcommand("generate", "Train a crowd and grade it on every example");
    gen->add_option("--train", crowd.train, "Dataset CSV the members train on")->required()->check(CLI::ExistingFile);
    gen->add_option("--data", crowd.data, "Dataset CSVs to label (default: the training set)")->check(CLI::ExistingFile);
    gen->add_option("-o,--out-dir", crowd.out_dir, "Output directory");
    gen->add_option("--format", crowd.format, "Response matrix format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
    gen->add_option("--n-classes", crowd.n_classes, "Number of classes")->capture_default_str();
    gen->add_option("--ensemble-size", crowd.cfg.ensemble_size, "Crowd size")->capture_default_str();
    gen->add_option("--seed", crowd.cfg.seed, "Random seed");
    gen->add_option("--learner", crowd.cfg.learner.kind, "Member learner")->check(CLI::IsMember({"logistic", "mlp"}))->capture_default_str();
    gen->add_option("--hidden", crowd.cfg.learner.hidden, "MLP hidden width")->capture_default_str();
    gen->add_option("--epochs", crowd.cfg.epochs, "Training epochs per member")->capture_default_str();
    gen->add_option("--lr", crowd.cfg.lr, "Learning rate")->capture_default_str();
    gen->callback([&] { action = [&] { return cmd_crowd(crowd); }; });

    PipelineArgs train;
    auto* train_cmd = app.add_subcommand("train", "Training runs for one strategy (or every configured strategy)");
    train_cmd->add_option("--config", train.config, "Experiment JSON config")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--strategy", train.strategy, "ddaclae, cb-linear, cb-root or full (default: all configured)")
        ->check(CLI::IsMember({"ddaclae", "cb-linear", "cb-root", "full"}));
    train_cmd->add_option("--difficulty", train.difficulty, "Difficulty source")->check(CLI::IsMember({"learned", "length"}))->capture_default_str();
    train_cmd->add_option("--seeds", train.seeds, "Number of run seeds (default: the configured list)");
    train_cmd->add_option("--output", train.output, "Override the output directory");
    train_cmd->add_flag("--force", train.force, "Recompute stages even if up to date");
    train_cmd->callback([&] { action = [&] { return cmd_train(train); }; });

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Analysis tables");
    analyze->require_subcommand(1);
    auto* corr = analyze->add_subcommand("correlation", "Spearman correlation of two difficulty files (matched by item id)");
    corr->add_option("--difficulties", an.difficulties, "Learned difficulty CSV")->required()->check(CLI::ExistingFile);
    corr->add_option("--heuristic", an.heuristic, "Heuristic difficulty CSV")->required()->check(CLI::ExistingFile);
    corr->callback([&] { action = [&] { return cmd_correlation(an); }; });
    auto* dist = analyze->add_subcommand("dist", "Histogram of difficulties (percent per bin)");
    dist->add_option("--difficulties", an.difficulties, "Difficulty CSV")->required()->check(CLI::ExistingFile);
    dist->add_option("--bins", an.bins, "Number of bins")->capture_default_str()->check(CLI::PositiveNumber);
    dist->add_option("--out", an.out, "Write the CSV here instead of stdout");
    dist->callback([&] { action = [&] { return cmd_dist(an); }; });
    auto* runs = analyze->add_subcommand("runs", "Strategy table of test accuracy and convergence epochs, mean [±CI]");
    runs->add_option("--results", an.results, "Directory of TrainResult JSON files")->required()->check(CLI::ExistingDirectory);
    runs->add_flag("--csv", an.csv, "Emit CSV instead of a markdown table");
    runs->callback([&] { action = [&] { return cmd_runs(an); }; });

    PipelineArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run the whole experiment described by a config");
    run_cmd->add_option("--config", run.config, "Experiment JSON config")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--output", run.output, "Override the output directory");
    run_cmd->add_flag("--force", run.force, "Recompute stages even if up to date");
    run_cmd->callback([&] { action = [&] { return cmd_run(run); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        return action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
}
