#include "cli.hpp"

#include "mixmom/errors.hpp"
#include "mixmom/estimator.hpp"
#include "mixmom/io.hpp"
#include "mixmom/simbench.hpp"
#include "mixmom/spectral.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace mixmom::cli {

namespace fs = std::filesystem;

namespace {

// Sample sizes may be written as 100000, 1e5 or 1.5e4.
int parse_count(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + text + "'");
    }
    if (used != text.size() || !(v >= 1.0) || v > 2e9 || std::floor(v) != v) {
        throw ConfigError("expected a positive integer, got '" + text + "'");
    }
    return static_cast<int>(v);
}

std::vector<int> parse_counts(const std::vector<std::string>& items) {
    std::vector<int> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        for (std::string part; std::getline(ss, part, ',');)
            if (!part.empty()) out.push_back(parse_count(part));
    }
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

struct GenerateArgs {
    std::string config;
    int experiment = 0;
    std::string link;
    std::string n;
    std::optional<std::uint64_t> seed;
    std::string out;
};

struct EstimateArgs {
    std::string data;
    int k = 0;
    std::string link = "logit";
    int random_starts = 0;
    bool no_w_update = false;
    bool init_only = false;
    bool no_covariance = false;
    int w_updates = 1;
    std::uint64_t seed = 1;
    double tol = 1e-8;
    int max_iter = 1000;
    std::string out;
};

struct ReproduceArgs {
    int experiment = 0;
    std::string config;
    std::string link = "logit";
    std::vector<std::string> n;
    std::optional<int> replications;
    std::optional<std::uint64_t> seed;
    std::optional<double> trim;
    int threads = 1;
    int random_starts = 0;
    bool per_replication = false;
    bool jsonl = false;
    bool no_w_update = false;
    std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    if (a.config.empty() == (a.experiment == 0)) throw ConfigError("give exactly one of --config or --experiment");
    ExperimentConfig cfg;
    if (!a.config.empty()) {
        cfg = read_config(a.config);
        if (!a.link.empty()) cfg.link = parse_link(a.link);
    } else {
        cfg = builtin_experiment(a.experiment, a.link.empty() ? Link::logit : parse_link(a.link));
    }
    const int n = a.n.empty() ? cfg.n_grid.front() : parse_count(a.n);
    const std::uint64_t seed = a.seed.value_or(cfg.seed);

    const fs::path dir = a.out;
    ensure_dir(dir);
    const Dataset data = generate(cfg.theta_star, cfg.link, n, seed);
    const fs::path file = dir / "data.csv";
    write_dataset(file, data);
    const fs::path cfg_file = dir / "config.json";
    Json effective = to_json(cfg);
    effective["n"] = n;
    effective["seed"] = seed;
    write_json(cfg_file, effective);

    std::vector<fs::path> inputs;
    if (!a.config.empty()) inputs.emplace_back(a.config);
    Json args{{"config", a.config}, {"experiment", a.experiment}, {"link", to_string(cfg.link)}, {"n", n}};
    write_manifest(dir, "generate", args, seed, inputs, {file, cfg_file});
    out << "wrote " << data.size() << " rows to " << file.string() << "\n";
    return kOk;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    const Link link = parse_link(a.link);
    const Dataset data = read_dataset(a.data);
    if (a.k < 1 || a.k > data.dim()) {
        throw ConfigError("K = " + std::to_string(a.k) + " must satisfy 1 <= K <= d = " + std::to_string(data.dim()));
    }
    const fs::path dir = a.out;
    ensure_dir(dir);
    Json args{{"data", a.data}, {"K", a.k}, {"link", a.link}};

    if (a.init_only) {
        const MomentSet ms = empirical_moments(data);
        const DirectionEstimate dir_est =
            init_directions(ms.m3, ms.m1, a.k, Eigen::MatrixXd::Identity(data.dim(), data.dim()));
        const fs::path file = dir / "directions.json";
        write_json(file, to_json(dir_est));
        args["init_only"] = true;
        write_manifest(dir, "estimate", args, a.seed, {a.data}, {file});
        out << "wrote " << file.string() << "\n";
        return kOk;
    }

    EstimateOptions opts;
    opts.optimizer.tol = a.tol;
    opts.optimizer.max_iter = a.max_iter;
    opts.w_updates = a.no_w_update ? 0 : a.w_updates;
    opts.covariance = !a.no_covariance;
    opts.seed = a.seed;
    const EstimateReport report =
        a.random_starts > 0 ? m3ls_random_starts(data, a.k, link, a.random_starts, opts) : m3ls(data, a.k, link, opts);

    const fs::path file = dir / "report.json";
    write_json(file, to_json(report, link));
    args["random_starts"] = a.random_starts;
    args["w_updates"] = opts.w_updates;
    args["covariance"] = opts.covariance;
    write_manifest(dir, "estimate", args, a.seed, {a.data}, {file});
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    out << "wrote " << file.string() << (report.converged ? "" : " (not converged)") << "\n";
    return report.converged ? kOk : kNumerical;
}

int cmd_reproduce(const ReproduceArgs& a, std::ostream& out, std::ostream& err) {
    if (a.config.empty() == (a.experiment == 0)) throw ConfigError("give an experiment id (1, 2 or 3) or --config");
    ExperimentConfig cfg = a.config.empty() ? builtin_experiment(a.experiment, parse_link(a.link)) : read_config(a.config);
    if (!a.n.empty()) cfg.n_grid = parse_counts(a.n);
    if (a.replications) cfg.replications = *a.replications;
    if (a.seed) cfg.seed = *a.seed;
    if (a.trim) cfg.trim_fraction = *a.trim;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const fs::path dir = a.out;
    ensure_dir(dir);
    RunOptions ro;
    ro.threads = a.threads;
    ro.random_starts = a.random_starts;
    ro.per_replication_errors = a.per_replication;
    ro.estimate.covariance = false;
    if (a.no_w_update) ro.estimate.w_updates = 0;

    std::vector<fs::path> outputs;
    std::ofstream jsonl;
    if (a.jsonl) {
        outputs.push_back(dir / "replications.jsonl");
        jsonl.open(outputs.back(), std::ios::binary);
        if (!jsonl) throw IoError("cannot write " + outputs.back().string());
        ro.on_replication = [&](const ReplicationResult& rep) { jsonl << to_json(rep).dump() << "\n"; };
    }
    const ExperimentResult res = run_experiment(cfg, ro);
    if (jsonl.is_open()) {
        jsonl.close();
        if (!jsonl) throw IoError("failed writing replications.jsonl");
    }

    const int ref_id = a.config.empty() ? a.experiment : 0;
    const std::string md = table_markdown(res.table, ref_id);
    outputs.push_back(dir / "table.csv");
    write_text(outputs.back(), table_csv(res.table, ref_id));
    outputs.push_back(dir / "table.md");
    write_text(outputs.back(), md);
    outputs.push_back(dir / "config.json");
    write_json(outputs.back(), to_json(cfg));

    std::vector<fs::path> inputs;
    if (!a.config.empty()) inputs.emplace_back(a.config);
    Json args{{"experiment", a.experiment},          {"config", a.config},
              {"link", to_string(cfg.link)},         {"n_grid", cfg.n_grid},
              {"replications", cfg.replications},    {"trim_fraction", cfg.trim_fraction},
              {"random_starts", a.random_starts},    {"per_replication_errors", a.per_replication},
              {"w_updates", ro.estimate.w_updates},  {"threads", a.threads}};
    write_manifest(dir, "reproduce", args, cfg.seed, inputs, outputs);

    for (const auto& w : res.warnings) err << "warning: " << w << "\n";
    out << md;
    return kOk;
}

int cmd_verify(const std::string& dir, std::ostream& out, std::ostream& err) {
    const auto bad = verify_manifest(dir);
    if (bad.empty()) {
        out << "manifest ok\n";
        return kOk;
    }
    for (const auto& b : bad) err << "hash mismatch: " << b << "\n";
    return kIo;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Moment estimation for mixtures of binary regressions", "mixmom"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Simulate a dataset as CSV");
    gen->add_option("--config", ga.config, "Experiment config JSON");
    gen->add_option("--experiment", ga.experiment, "Built-in experiment id (1, 2 or 3)");
    gen->add_option("--link", ga.link, "logit or probit (overrides the config)");
    gen->add_option("--n", ga.n, "Number of rows, e.g. 1e5");
    gen->add_option("--seed", ga.seed, "Random seed");
    gen->add_option("--out", ga.out, "Output directory")->required();

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Estimate mixture parameters from a CSV dataset");
    est->add_option("--data", ea.data, "CSV with header x1,...,xd,y")->required();
    est->add_option("--K", ea.k, "Number of components")->required();
    est->add_option("--link", ea.link, "logit or probit");
    est->add_option("--random-starts", ea.random_starts, "Start from the best of R random direction sets");
    est->add_flag("--no-w-update", ea.no_w_update, "Stop after the fit with the initial weighting");
    est->add_option("--w-updates", ea.w_updates, "Number of weighting-matrix re-estimations");
    est->add_flag("--init-only", ea.init_only, "Only compute the spectral initial directions");
    est->add_flag("--no-covariance", ea.no_covariance, "Skip the plug-in covariance");
    est->add_option("--seed", ea.seed, "Seed for random starts");
    est->add_option("--tol", ea.tol, "Projected-gradient tolerance");
    est->add_option("--max-iter", ea.max_iter, "Optimizer iteration limit");
    est->add_option("--out", ea.out, "Output directory")->required();

    ReproduceArgs ra;
    auto* rep = app.add_subcommand("reproduce", "Run a replication study and tabulate summed errors");
    rep->add_option("experiment", ra.experiment, "Built-in experiment id (1, 2 or 3)");
    rep->add_option("--config", ra.config, "Custom experiment config JSON instead of a built-in id");
    rep->add_option("--link", ra.link, "logit or probit");
    rep->add_option("--n", ra.n, "Sample sizes, e.g. 1e5 or 5e3,1e4")->expected(1, -1);
    rep->add_option("--N", ra.replications, "Replications per sample size");
    rep->add_option("--seed", ra.seed, "Base seed; replication r uses seed + r");
    rep->add_option("--trim", ra.trim, "Fraction of replications with largest L1 error to drop");
    rep->add_option("--threads", ra.threads, "Worker threads")->envname("MIXMOM_THREADS");
    rep->add_option("--random-starts", ra.random_starts, "Random starts instead of the spectral start");
    rep->add_flag("--per-replication", ra.per_replication, "Average per-replication errors instead of estimates");
    rep->add_flag("--jsonl", ra.jsonl, "Also write replications.jsonl");
    rep->add_flag("--no-w-update", ra.no_w_update, "Skip the weighting-matrix re-estimation");
    rep->add_option("--out", ra.out, "Output directory")->required();

    std::string verify_dir;
    auto* ver = app.add_subcommand("verify", "Check the hashes recorded in an output manifest");
    ver->add_option("dir", verify_dir, "Output directory")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (gen->parsed()) return cmd_generate(ga, out);
        if (est->parsed()) return cmd_estimate(ea, out, err);
        if (rep->parsed()) return cmd_reproduce(ra, out, err);
        if (ver->parsed()) return cmd_verify(verify_dir, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}

}  // namespace mixmom::cli
