#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hawkesmix/common.hpp"
#include "hawkesmix/event_data.hpp"
#include "hawkesmix/hawkes.hpp"
#include "hawkesmix/inference.hpp"
#include "hawkesmix/metrics.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/rng.hpp"

namespace hawkesmix::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

void write_json_file(const json& doc, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed for " + file.string());
}

json load_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw invalid_input("malformed JSON in " + file.string() + ": " + e.what());
    }
    return doc;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& args,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_clock_sec) {
    json manifest;
    manifest["command"] = command;
    manifest["version"] = kVersion;
    manifest["seed"] = seed;
    manifest["args"] = args;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    manifest["wall_clock_sec"] = wall_clock_sec;
    write_json_file(manifest, out_dir / "manifest.json");
}

void ensure_out_dir(const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw invalid_input("cannot create output directory " + out_dir.string());
}

ImpactKind parse_kind(const std::string& s) {
    if (s == "sine") return ImpactKind::Sine;
    if (s == "piecewise") return ImpactKind::Piecewise;
    throw invalid_input("unknown impact kind '" + s + "' (expected sine or piecewise)");
}

FitConfig fit_config_from_json(const json& args) {
    FitConfig cfg;
    cfg.k_init = args.value("k_init", cfg.k_init);
    cfg.outer_iters = args.value("outer", cfg.outer_iters);
    cfg.inner_budget = args.value("budget", cfg.inner_budget);
    cfg.strategy.kind = parse_strategy(args.value("strategy", std::string("open_loop")));
    cfg.strategy.low = args.value("ramp_low", cfg.strategy.low);
    cfg.strategy.high = args.value("ramp_high", cfg.strategy.high);
    cfg.n_min = args.value("n_min", cfg.n_min);
    cfg.mcmc = args.value("mcmc", cfg.mcmc);
    cfg.seed = args.value("seed", cfg.seed);
    cfg.nll_tol = args.value("nll_tol", cfg.nll_tol);
    cfg.basis_eps_rel = args.value("basis_eps", cfg.basis_eps_rel);
    cfg.alpha0 = args.value("alpha0", cfg.alpha0);
    return cfg;
}

json fit_args_to_json(const FitConfig& cfg) {
    json a;
    a["k_init"] = cfg.k_init;
    a["outer"] = cfg.outer_iters;
    a["budget"] = cfg.inner_budget;
    a["strategy"] = strategy_name(cfg.strategy.kind);
    a["ramp_low"] = cfg.strategy.low;
    a["ramp_high"] = cfg.strategy.high;
    a["n_min"] = cfg.n_min;
    a["mcmc"] = cfg.mcmc;
    a["seed"] = cfg.seed;
    a["nll_tol"] = cfg.nll_tol;
    a["basis_eps"] = cfg.basis_eps_rel;
    a["alpha0"] = cfg.alpha0;
    return a;
}

}  // namespace

void run_simulate(const json& args, const fs::path& out_dir) {
    const auto start = Clock::now();
    ensure_out_dir(out_dir);
    const int k = args.value("K", 2);
    const int c = args.value("C", 5);
    const int npc = args.value("n_per_cluster", 100);
    const int events = args.value("events", 50);
    const std::string kind_name = args.value("kind", std::string("sine"));
    const std::uint64_t seed = args.value("seed", std::uint64_t{0});
    const double radius = args.value("radius", 0.8);

    const SyntheticSuite suite =
        make_synthetic_suite(k, c, npc, events, parse_kind(kind_name), seed, radius);
    save_corpus(suite.corpus, out_dir / "corpus.jsonl");
    save_labels(suite.corpus, suite.labels, out_dir / "labels.json");
    save_suite_truth(suite, out_dir / "truth.json");

    json echo = args;
    echo["K"] = k;
    echo["C"] = c;
    echo["n_per_cluster"] = npc;
    echo["events"] = events;
    echo["kind"] = kind_name;
    echo["seed"] = seed;
    echo["radius"] = radius;
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    write_manifest(out_dir, "simulate", echo, seed, {},
                   {"corpus.jsonl", "labels.json", "truth.json"}, wall);
}

void run_fit(const json& args, const fs::path& out_dir) {
    const auto start = Clock::now();
    ensure_out_dir(out_dir);
    if (!args.contains("corpus")) throw invalid_input("fit: missing corpus path");
    const std::string corpus_path = args.at("corpus").get<std::string>();
    if (!fs::exists(corpus_path)) throw invalid_input("fit: corpus file not found: " + corpus_path);
    const Corpus corpus = load_corpus(corpus_path);
    const FitConfig cfg = fit_config_from_json(args);

    const FitReport report = fit(corpus, cfg);
    save_model(report.model, out_dir / "model.json");
    save_report(report, out_dir / "report.json");
    save_trace_csv(report, out_dir / "trace.csv");

    json echo = fit_args_to_json(cfg);
    echo["corpus"] = corpus_path;
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    write_manifest(out_dir, "fit", echo, cfg.seed, {corpus_path},
                   {"model.json", "report.json", "trace.csv"}, wall);
}

void run_assign(const json& args, const fs::path& out_dir) {
    const auto start = Clock::now();
    ensure_out_dir(out_dir);
    if (!args.contains("model") || !args.contains("corpus"))
        throw invalid_input("assign: need model and corpus paths");
    const std::string model_path = args.at("model").get<std::string>();
    const std::string corpus_path = args.at("corpus").get<std::string>();
    if (!fs::exists(model_path)) throw invalid_input("assign: model file not found: " + model_path);
    if (!fs::exists(corpus_path))
        throw invalid_input("assign: corpus file not found: " + corpus_path);

    const MixtureModel model = load_model(model_path);
    const Corpus corpus = load_corpus(corpus_path);
    const AssignResult result = assign(model, corpus);
    save_labels(corpus, result.labels, out_dir / "assignments.json");

    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    write_manifest(out_dir, "assign", {{"model", model_path}, {"corpus", corpus_path}}, 0,
                   {model_path, corpus_path}, {"assignments.json"}, wall);
}

void run_evaluate(const json& args, const fs::path& out_dir) {
    const auto start = Clock::now();
    ensure_out_dir(out_dir);
    std::vector<std::string> preds, reports;
    if (args.contains("pred")) preds = args.at("pred").get<std::vector<std::string>>();
    if (args.contains("reports")) reports = args.at("reports").get<std::vector<std::string>>();
    const bool has_truth = args.contains("truth") && !args.at("truth").is_null();
    const bool has_minor = args.contains("minor") && !args.at("minor").is_null();

    json records = json::array();
    std::vector<std::string> inputs;
    if (has_truth) {
        const std::string truth_path = args.at("truth").get<std::string>();
        inputs.push_back(truth_path);
        const Partition truth{load_labels(truth_path)};
        if (preds.empty()) throw invalid_input("evaluate: truth given but no predictions");
        for (const std::string& p : preds) {
            const Partition pred{load_labels(p)};
            records.push_back(
                {{"metric", "purity"}, {"value", purity(pred, truth)}, {"pred", p}, {"truth", truth_path}});
            if (has_minor) {
                const int minor = args.at("minor").get<int>();
                records.push_back({{"metric", "f1_minor"},
                                   {"value", f1_minor(pred, truth, minor)},
                                   {"minor_class", minor},
                                   {"pred", p},
                                   {"truth", truth_path}});
            }
        }
    }
    if (preds.size() >= 2) {
        std::vector<Partition> trials;
        trials.reserve(preds.size());
        for (const std::string& p : preds) trials.emplace_back(load_labels(p));
        records.push_back(
            {{"metric", "consistency"}, {"value", consistency(trials)}, {"trials", preds}});
    }
    if (!reports.empty()) {
        std::vector<int> ks;
        ks.reserve(reports.size());
        for (const std::string& r : reports) ks.push_back(report_final_k(r));
        json hist = json::object();
        for (const auto& [kk, cnt] : k_histogram(ks)) hist[std::to_string(kk)] = cnt;
        records.push_back({{"metric", "k_histogram"}, {"value", hist}, {"reports", reports}});
    }
    if (records.empty())
        throw invalid_input(
            "evaluate: nothing to do (give --pred with --truth, two or more --pred, or --reports)");
    for (const std::string& p : preds) inputs.push_back(p);
    for (const std::string& r : reports) inputs.push_back(r);
    write_json_file(json{{"records", records}}, out_dir / "metrics.json");

    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    write_manifest(out_dir, "evaluate", args, 0, inputs, {"metrics.json"}, wall);
}

namespace {

std::string cell_file_name(const std::string& tag, std::size_t index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "cell_%s_%03zu.json", tag.c_str(), index);
    return buf;
}

// NLL-vs-budget curves, one per allocation strategy, averaged over trials
// that share a corpus but use independent fit seeds.
void run_sweep_strategy(const json& spec, const fs::path& out_dir,
                        std::vector<std::string>& outputs) {
    const json& corpus_spec = spec.at("corpus");
    const SyntheticSuite suite = make_synthetic_suite(
        corpus_spec.value("K", 2), corpus_spec.value("C", 2), corpus_spec.value("n_per_cluster", 25),
        corpus_spec.value("events", 30), parse_kind(corpus_spec.value("kind", std::string("sine"))),
        corpus_spec.value("seed", std::uint64_t{0}), corpus_spec.value("radius", 0.8));

    std::vector<std::string> strategies =
        spec.value("strategies", std::vector<std::string>{"constant", "increasing", "decreasing",
                                                          "open_loop"});
    const int trials = spec.value("trials", 5);
    const std::uint64_t master = spec.value("seed", std::uint64_t{0});

    fs::create_directories(out_dir / "cells");
    std::ofstream csv(out_dir / "strategy_curves.csv");
    csv << "# NLL trace per inner-iteration allocation strategy, averaged over " << trials
        << " trials on one shared synthetic corpus.\n"
           "# strategy: allocation policy; outer_iter: 0-based outer EM iteration;\n"
           "# cum_inner: cumulative inner iterations spent through this outer iteration;\n"
           "# mean_nll: mean negative mixture log-likelihood across trials (nan = all trials "
           "failed);\n"
           "# trials_ok: trials contributing to the mean.\n"
           "strategy,outer_iter,cum_inner,mean_nll,trials_ok\n";
    for (std::size_t si = 0; si < strategies.size(); ++si) {
        std::vector<FitReport> ok;
        for (int t = 0; t < trials; ++t) {
            json cell{{"strategy", strategies[si]}, {"trial", t}};
            try {
                json fit_args = spec.contains("fit") ? spec.at("fit") : json::object();
                fit_args["strategy"] = strategies[si];
                FitConfig cfg = fit_config_from_json(fit_args);
                // Budget fairness: the open-loop policy spends exactly 2
                // inner sweeps per outer iteration, so it needs budget/2
                // outer iterations to consume the same total budget the
                // heuristic schedules spread over theirs.
                if (cfg.strategy.kind == Strategy::Kind::OpenLoop)
                    cfg.outer_iters = std::max(1, cfg.inner_budget / 2);
                cfg.seed = derive_seed(master, {si, static_cast<std::uint64_t>(t)});
                FitReport rep = fit(suite.corpus, cfg);
                json trace = json::array();
                for (const TraceRow& row : rep.trace)
                    trace.push_back({{"iter", row.outer},
                                     {"inner_used", row.inner_used},
                                     {"nll", row.nll},
                                     {"K", row.num_clusters}});
                cell["trace"] = trace;
                ok.push_back(std::move(rep));
            } catch (const std::exception& e) {
                cell["error"] = e.what();  // partial failure: noted, sweep continues
            }
            const std::string name = cell_file_name(strategies[si], static_cast<std::size_t>(t));
            write_json_file(cell, out_dir / "cells" / name);
            outputs.push_back("cells/" + name);
        }
        std::size_t longest = 0;
        for (const FitReport& rep : ok) longest = std::max(longest, rep.trace.size());
        long cum_inner = 0;
        for (std::size_t row = 0; row < std::max<std::size_t>(longest, 1); ++row) {
            double sum = 0.0;
            int n_ok = 0;
            int inner_used = 0;
            for (const FitReport& rep : ok)
                if (row < rep.trace.size()) {
                    sum += rep.trace[row].nll;
                    inner_used = rep.trace[row].inner_used;
                    ++n_ok;
                }
            cum_inner += inner_used;
            char value[40];
            if (n_ok > 0)
                std::snprintf(value, sizeof value, "%.17g", sum / n_ok);
            else
                std::snprintf(value, sizeof value, "nan");
            csv << strategies[si] << "," << row << "," << cum_inner << "," << value << "," << n_ok
                << "\n";
        }
    }
    if (!csv) throw std::runtime_error("write failed for strategy_curves.csv");
    outputs.push_back("strategy_curves.csv");
}

// Minor-cluster F1 over a (separation d, minor fraction pi1) grid on a
// one-type binary problem: cluster parameters theta = (mu, a) sit at
// theta_base and theta_base + (d/sqrt(2)) * (1, 1), so their Euclidean
// separation is exactly d; a fraction pi1 of sequences comes from the
// shifted (minor, label 1) cluster.
void run_sweep_f1_map(const json& spec, const fs::path& out_dir,
                      std::vector<std::string>& outputs) {
    const std::vector<double> grid_d = spec.at("grid_d").get<std::vector<double>>();
    const std::vector<double> grid_pi = spec.at("grid_pi").get<std::vector<double>>();
    const int n_sequences = spec.value("n_sequences", 200);
    const double horizon = spec.value("horizon", 50.0);
    const int trials = spec.value("trials", 1);
    const std::uint64_t master = spec.value("seed", std::uint64_t{0});
    std::vector<double> theta_base = spec.value("theta_base", std::vector<double>{0.5, 0.25});
    if (theta_base.size() != 2) throw invalid_input("sweep: theta_base must be [mu, a]");

    // The generator uses a single unit-bandwidth Gaussian kernel at lag 0.
    BasisSet gen_basis;
    gen_basis.count = 1;
    gen_basis.omega0 = 1.0;
    gen_basis.bandwidth = 1.0;
    gen_basis.t_max = horizon;
    gen_basis.centers = {0.0};

    fs::create_directories(out_dir / "cells");
    std::ofstream csv(out_dir / "f1_map.csv");
    csv << "# Minor-cluster F1 on a one-type binary clustering problem with " << n_sequences
        << " sequences per cell.\n"
           "# d: Euclidean separation of the two cluster parameter vectors (mu, a);\n"
           "# pi1: fraction of sequences drawn from the minor (shifted) cluster;\n"
           "# mean_f1: minor-class F1 after Hungarian matching, averaged over " << trials
        << " trial(s) (nan = all trials failed).\n"
           "d,pi1,mean_f1,trials_ok\n";
    std::size_t cell_index = 0;
    for (std::size_t di = 0; di < grid_d.size(); ++di) {
        for (std::size_t pi_i = 0; pi_i < grid_pi.size(); ++pi_i, ++cell_index) {
            const double d = grid_d[di];
            const double pi1 = grid_pi[pi_i];
            const int n_minor = static_cast<int>(std::lround(pi1 * n_sequences));
            if (n_minor < 1 || n_minor >= n_sequences)
                throw invalid_input("sweep: pi1 leaves an empty cluster");
            const double shift = d / std::sqrt(2.0);

            HawkesParams gen_major, gen_minor;
            gen_major.num_types = gen_minor.num_types = 1;
            gen_major.num_basis = gen_minor.num_basis = 1;
            gen_major.mu = {theta_base[0]};
            gen_major.coeffs = {theta_base[1]};
            gen_minor.mu = {theta_base[0] + shift};
            gen_minor.coeffs = {theta_base[1] + shift};

            json cell{{"d", d}, {"pi1", pi1}, {"f1", json::array()}};
            double sum_f1 = 0.0;
            int n_ok = 0;
            for (int t = 0; t < trials; ++t) {
                const std::uint64_t cell_seed =
                    derive_seed(master, {di, pi_i, static_cast<std::uint64_t>(t)});
                try {
                    Corpus corpus;
                    corpus.num_types = 1;
                    corpus.types_declared = true;
                    std::vector<int> truth_labels;
                    char id[32];
                    for (int n = 0; n < n_sequences; ++n) {
                        const bool is_minor = n >= n_sequences - n_minor;
                        Rng seq_rng(derive_seed(cell_seed, {1, static_cast<std::uint64_t>(n)}));
                        std::snprintf(id, sizeof id, "c%d-s%04d", is_minor ? 1 : 0, n);
                        corpus.sequences.push_back(
                            simulate(is_minor ? gen_minor : gen_major, gen_basis, horizon, seq_rng, id));
                        truth_labels.push_back(is_minor ? 1 : 0);
                    }
                    json fit_args = spec.contains("fit") ? spec.at("fit") : json::object();
                    FitConfig cfg = fit_config_from_json(fit_args);
                    cfg.seed = derive_seed(cell_seed, {2});
                    const FitReport rep = fit(corpus, cfg);
                    const double f1 = f1_minor(Partition{rep.labels}, Partition{truth_labels}, 1);
                    cell["f1"].push_back(f1);
                    sum_f1 += f1;
                    ++n_ok;
                } catch (const std::exception& e) {
                    cell["error"] = e.what();  // partial failure: noted, sweep continues
                }
            }
            const std::string name = cell_file_name("f1", cell_index);
            write_json_file(cell, out_dir / "cells" / name);
            outputs.push_back("cells/" + name);
            char value[40];
            if (n_ok > 0)
                std::snprintf(value, sizeof value, "%.17g", sum_f1 / n_ok);
            else
                std::snprintf(value, sizeof value, "nan");
            csv << grid_d[di] << "," << grid_pi[pi_i] << "," << value << "," << n_ok << "\n";
        }
    }
    if (!csv) throw std::runtime_error("write failed for f1_map.csv");
    outputs.push_back("f1_map.csv");
}

}  // namespace

void run_sweep(const json& args, const fs::path& out_dir) {
    const auto start = Clock::now();
    ensure_out_dir(out_dir);
    if (!args.contains("spec")) throw invalid_input("sweep: missing spec");
    const json& spec = args.at("spec");
    const std::string mode = spec.value("mode", std::string());

    // Cells are independent and could run concurrently; they execute in cell
    // order here, which also fixes the merged row order.
    std::vector<std::string> outputs;
    if (mode == "strategy") {
        run_sweep_strategy(spec, out_dir, outputs);
    } else if (mode == "f1_map") {
        run_sweep_f1_map(spec, out_dir, outputs);
    } else {
        throw invalid_input("sweep: unknown mode '" + mode + "' (expected strategy or f1_map)");
    }
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    write_manifest(out_dir, "sweep", args, spec.value("seed", std::uint64_t{0}), {}, outputs, wall);
}

void dispatch(const std::string& command, const json& args, const fs::path& out_dir) {
    if (command == "simulate") return run_simulate(args, out_dir);
    if (command == "fit") return run_fit(args, out_dir);
    if (command == "assign") return run_assign(args, out_dir);
    if (command == "evaluate") return run_evaluate(args, out_dir);
    if (command == "sweep") return run_sweep(args, out_dir);
    throw invalid_input("unknown command '" + command + "' in manifest");
}

void run_rerun(const fs::path& manifest_file, const fs::path& out_dir) {
    const json manifest = load_json_file(manifest_file);
    if (!manifest.contains("command") || !manifest.contains("args"))
        throw invalid_input("rerun: " + manifest_file.string() +
                            " is not a run manifest (missing command/args)");
    dispatch(manifest.at("command").get<std::string>(), manifest.at("args"), out_dir);
}

}  // namespace hawkesmix::cli
