#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hawkesmix/basis.hpp"
#include "hawkesmix/hawkes.hpp"

namespace hawkesmix {

// Variational posterior over a truncated mixture of Hawkes processes:
// Dirichlet(alpha) over cluster weights, per-cluster Rayleigh scales for base
// intensities (E[mu] = sqrt(pi/2) beta) and Exponential scales for kernel
// coefficients (E[a] = sigma). Storage is cluster-major; the JSON layout is
// cluster-minor and transposed at the file boundary.
struct MixtureModel {
    int num_clusters = 0;  // K
    int num_types = 0;     // C
    int num_basis = 0;     // D
    std::vector<double> alpha;       // K
    std::vector<double> rayleigh_b;  // K*C
    std::vector<double> exp_sigma;   // K*C*C*D
    BasisSet basis;

    double beta(int k, int c) const { return rayleigh_b[static_cast<std::size_t>(k) * num_types + c]; }
    double& beta(int k, int c) { return rayleigh_b[static_cast<std::size_t>(k) * num_types + c]; }
    double sigma(int k, int c, int cp, int d) const {
        return exp_sigma[((static_cast<std::size_t>(k) * num_types + c) * num_types + cp) * num_basis + d];
    }
    double& sigma(int k, int c, int cp, int d) {
        return exp_sigma[((static_cast<std::size_t>(k) * num_types + c) * num_types + cp) * num_basis + d];
    }

    // Expectation-point Hawkes parameters of cluster k.
    HawkesParams point_params(int k) const;
    void validate() const;
};

void save_model(const MixtureModel& model, const std::filesystem::path& file);
MixtureModel load_model(const std::filesystem::path& file);

struct Responsibilities {
    std::size_t num_sequences = 0;
    int num_clusters = 0;
    std::vector<double> weights;  // N*K row-major
    std::vector<double> counts;   // K, column sums

    double at(std::size_t n, int k) const { return weights[n * num_clusters + k]; }
    double& at(std::size_t n, int k) { return weights[n * num_clusters + k]; }
    void recount();
};

// MAP point estimates for every cluster, same cluster-major layout as the
// model scales.
struct PointParams {
    int num_clusters = 0;
    int num_types = 0;
    int num_basis = 0;
    std::vector<double> mu;      // K*C
    std::vector<double> coeffs;  // K*C*C*D

    double at_mu(int k, int c) const { return mu[static_cast<std::size_t>(k) * num_types + c]; }
    double& at_mu(int k, int c) { return mu[static_cast<std::size_t>(k) * num_types + c]; }
    double a(int k, int c, int cp, int d) const {
        return coeffs[((static_cast<std::size_t>(k) * num_types + c) * num_types + cp) * num_basis + d];
    }
    double& a(int k, int c, int cp, int d) {
        return coeffs[((static_cast<std::size_t>(k) * num_types + c) * num_types + cp) * num_basis + d];
    }
    HawkesParams cluster(int k) const;
};

struct Strategy {
    enum class Kind { Constant, Increasing, Decreasing, OpenLoop };
    Kind kind = Kind::OpenLoop;
    int low = 2;   // ramp endpoints for increasing/decreasing
    int high = 8;
};

Strategy::Kind parse_strategy(const std::string& name);
std::string strategy_name(Strategy::Kind kind);

struct FitConfig {
    int k_init = 10;
    int outer_iters = 20;
    int inner_budget = 100;
    Strategy strategy;
    double n_min = 1.0;        // prune threshold; empty clusters always go
    bool mcmc = false;
    std::uint64_t seed = 0;
    double nll_tol = 0.0;      // <= 0: never stop early
    double basis_eps_rel = 0.05;
    double alpha0 = 1.0;
};

struct TraceRow {
    int outer = 0;
    int inner_used = 0;
    double nll = 0.0;
    int num_clusters = 0;
};

struct FitReport {
    FitConfig config;
    std::vector<TraceRow> trace;
    MixtureModel model;
    Responsibilities resp;
    std::vector<int> labels;
};

void save_report(const FitReport& report, const std::filesystem::path& file);
void save_trace_csv(const FitReport& report, const std::filesystem::path& file);
std::vector<int> report_labels(const std::filesystem::path& file);
int report_final_k(const std::filesystem::path& file);

// Config echo as a JSON object string (manifests, report embedding).
std::string config_json_string(const FitConfig& config);

}  // namespace hawkesmix
