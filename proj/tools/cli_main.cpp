#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hawkesmix/common.hpp"
#include "hawkesmix/parallel.hpp"

namespace {

using hawkesmix::cli::json;

int protected_run(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const hawkesmix::invalid_input& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hawkesmix: clustering of event sequences with a Dirichlet mixture of "
                 "multivariate Hawkes processes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(hawkesmix::kVersion));
    int threads = 0;
    app.add_option("--threads", threads,
                   "worker threads (default: HAWKESMIX_THREADS, then all hardware threads); "
                   "numeric outputs do not depend on it");

    // ---- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a labeled synthetic corpus");
    int sim_k = 2, sim_c = 5, sim_npc = 100, sim_events = 50;
    std::string sim_kind = "sine", sim_out;
    std::uint64_t sim_seed = 0;
    double sim_radius = 0.8;
    sim->add_option("--K", sim_k, "number of clusters")->check(CLI::PositiveNumber);
    sim->add_option("--C", sim_c, "number of event types")->check(CLI::PositiveNumber);
    sim->add_option("--n-per-cluster", sim_npc, "sequences per cluster")
        ->check(CLI::PositiveNumber);
    sim->add_option("--events", sim_events, "target events per sequence")
        ->check(CLI::PositiveNumber);
    sim->add_option("--kind", sim_kind, "impact function kind: sine or piecewise")
        ->check(CLI::IsMember({"sine", "piecewise"}));
    sim->add_option("--seed", sim_seed, "master seed");
    sim->add_option("--radius", sim_radius,
                    "target infectivity spectral radius (<= 0: keep raw draws)");
    sim->add_option("--out", sim_out, "output directory")->required();

    // ---- fit ---------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "fit the mixture to a corpus");
    std::string fit_corpus, fit_strategy = "open_loop", fit_out;
    int fit_k_init = 10, fit_outer = 20, fit_budget = 100, fit_ramp_low = 2, fit_ramp_high = 8;
    double fit_n_min = 1.0, fit_nll_tol = 0.0, fit_basis_eps = 0.05, fit_alpha0 = 1.0;
    bool fit_mcmc = false;
    std::uint64_t fit_seed = 0;
    fit->add_option("--corpus", fit_corpus, "corpus file (.jsonl or .csv)")->required();
    fit->add_option("--k-init", fit_k_init, "initial number of clusters")
        ->check(CLI::PositiveNumber);
    fit->add_option("--outer", fit_outer, "outer EM iterations")->check(CLI::PositiveNumber);
    fit->add_option("--budget", fit_budget, "total inner-iteration budget")
        ->check(CLI::PositiveNumber);
    fit->add_option("--strategy", fit_strategy,
                    "inner-iteration allocation: constant, increasing, decreasing, open_loop")
        ->check(CLI::IsMember({"constant", "increasing", "decreasing", "open_loop"}));
    fit->add_option("--ramp-low", fit_ramp_low, "ramp floor for increasing/decreasing")
        ->check(CLI::PositiveNumber);
    fit->add_option("--ramp-high", fit_ramp_high, "ramp ceiling for increasing/decreasing")
        ->check(CLI::PositiveNumber);
    fit->add_option("--n-min", fit_n_min, "minimum effective cluster size before pruning");
    fit->add_flag("--mcmc", fit_mcmc, "enable merge/split moves on the cluster count");
    fit->add_option("--seed", fit_seed, "fit seed (initialization and MCMC)");
    fit->add_option("--nll-tol", fit_nll_tol, "early-stop tolerance on NLL decrease (<= 0: off)");
    fit->add_option("--basis-eps", fit_basis_eps,
                    "spectral tail fraction for basis selection")
        ->check(CLI::PositiveNumber);
    fit->add_option("--alpha0", fit_alpha0, "Dirichlet concentration")->check(CLI::PositiveNumber);
    fit->add_option("--out", fit_out, "output directory")->required();

    // ---- assign ------------------------------------------------------------
    auto* asg = app.add_subcommand("assign", "assign sequences to a fitted model's clusters");
    std::string asg_model, asg_corpus, asg_out;
    asg->add_option("--model", asg_model, "model file from fit")->required();
    asg->add_option("--corpus", asg_corpus, "corpus file")->required();
    asg->add_option("--out", asg_out, "output directory")->required();

    // ---- evaluate ----------------------------------------------------------
    auto* eva = app.add_subcommand("evaluate", "clustering metrics from label files");
    std::vector<std::string> eva_pred, eva_reports;
    std::string eva_truth, eva_out;
    int eva_minor = -1;
    eva->add_option("--pred", eva_pred,
                    "prediction label file(s); two or more also yield consistency");
    eva->add_option("--truth", eva_truth, "ground-truth label file (enables purity)");
    eva->add_option("--minor", eva_minor, "minor class label (enables f1_minor; needs --truth)");
    eva->add_option("--reports", eva_reports, "fit report file(s) for the K histogram");
    eva->add_option("--out", eva_out, "output directory")->required();

    // ---- sweep -------------------------------------------------------------
    auto* swp = app.add_subcommand("sweep", "run a grid experiment from a spec file");
    std::string swp_spec, swp_out;
    swp->add_option("--spec", swp_spec, "sweep spec JSON (mode: strategy or f1_map)")->required();
    swp->add_option("--out", swp_out, "output directory")->required();

    // ---- rerun -------------------------------------------------------------
    auto* rrn = app.add_subcommand("rerun", "re-execute a recorded run from its manifest");
    std::string rrn_manifest, rrn_out;
    rrn->add_option("--manifest", rrn_manifest, "manifest.json of a previous run")->required();
    rrn->add_option("--out", rrn_out, "output directory for the reproduced run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage and validation failures exit 2
    }
    if (threads > 0) hawkesmix::set_threads(threads);

    if (sim->parsed())
        return protected_run([&] {
            hawkesmix::cli::run_simulate({{"K", sim_k},
                                          {"C", sim_c},
                                          {"n_per_cluster", sim_npc},
                                          {"events", sim_events},
                                          {"kind", sim_kind},
                                          {"seed", sim_seed},
                                          {"radius", sim_radius}},
                                         sim_out);
        });
    if (fit->parsed())
        return protected_run([&] {
            hawkesmix::cli::run_fit({{"corpus", fit_corpus},
                                     {"k_init", fit_k_init},
                                     {"outer", fit_outer},
                                     {"budget", fit_budget},
                                     {"strategy", fit_strategy},
                                     {"ramp_low", fit_ramp_low},
                                     {"ramp_high", fit_ramp_high},
                                     {"n_min", fit_n_min},
                                     {"mcmc", fit_mcmc},
                                     {"seed", fit_seed},
                                     {"nll_tol", fit_nll_tol},
                                     {"basis_eps", fit_basis_eps},
                                     {"alpha0", fit_alpha0}},
                                    fit_out);
        });
    if (asg->parsed())
        return protected_run([&] {
            hawkesmix::cli::run_assign({{"model", asg_model}, {"corpus", asg_corpus}}, asg_out);
        });
    if (eva->parsed())
        return protected_run([&] {
            json args;
            if (!eva_pred.empty()) args["pred"] = eva_pred;
            if (!eva_truth.empty()) args["truth"] = eva_truth;
            if (eva_minor >= 0) args["minor"] = eva_minor;
            if (!eva_reports.empty()) args["reports"] = eva_reports;
            hawkesmix::cli::run_evaluate(args, eva_out);
        });
    if (swp->parsed())
        return protected_run([&] {
            std::ifstream in(swp_spec);
            if (!in) throw hawkesmix::invalid_input("cannot open sweep spec " + swp_spec);
            json spec;
            try {
                in >> spec;
            } catch (const json::exception& e) {
                throw hawkesmix::invalid_input("malformed sweep spec " + swp_spec + ": " +
                                               e.what());
            }
            hawkesmix::cli::run_sweep({{"spec", spec}}, swp_out);
        });
    if (rrn->parsed())
        return protected_run([&] { hawkesmix::cli::run_rerun(rrn_manifest, rrn_out); });
    return 2;  // unreachable: require_subcommand(1)
}
