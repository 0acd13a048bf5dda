#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hawkesmix/cache.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/rng.hpp"

namespace hawkesmix {

// Soft assignments from the current variational posterior. Rows are
// normalized in log space (max-shift) and then divided through, so each row
// sums to 1 within 1e-12 regardless of the log-score spread.
Responsibilities e_step(const MixtureModel& model, const Corpus& corpus, const CorpusCache& cache);

// log HP(s_n | cluster k) at the given point estimates, N x K row-major.
std::vector<double> cluster_log_likelihood_matrix(const PointParams& points, const Corpus& corpus,
                                                  const CorpusCache& cache);

// Negative mixture log-likelihood -sum_n log sum_k pi_k HP(s_n|k) with
// pi_k = counts_k / N; clusters with zero count drop out of the sum.
double mixture_nll(const PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                   const CorpusCache& cache);
double mixture_nll_from_loglik(const std::vector<double>& loglik, const std::vector<double>& counts);

// Quadratic coefficients of each mu update, exposed for verification.
struct InnerDiagnostics {
    std::vector<double> quad_a, quad_b, quad_c;  // per (k, c), k-major
};

// One inner EM sweep of the MAP problem: closed-form mu roots and coefficient
// ratios, with latent attribution probabilities taken at the incoming point.
void inner_m_iteration(PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                       const CorpusCache& cache, const MixtureModel& priors,
                       InnerDiagnostics* diag = nullptr);

// log p(mu|B) + log p(A|Sigma) + sum_{n,k} r_nk log HP(s_n|k).
double map_objective(const PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                     const CorpusCache& cache, const MixtureModel& priors);

// Prior-mean start of every M-step: mu = sqrt(pi/2) B, A = Sigma.
PointParams prior_mean_points(const MixtureModel& model);

PointParams m_step(const Responsibilities& resp, const Corpus& corpus, const CorpusCache& cache,
                   const MixtureModel& priors, int n_inner, double* objective = nullptr);

// Sigma^k = A-hat^k, B^k = sqrt(2/pi) mu-hat^k (both floored at 1e-8),
// alpha_k = alpha0/K + N_k.
void refresh_hyperparams(MixtureModel& model, const PointParams& points,
                         const Responsibilities& resp, double alpha0);

// Inner-sweep counts per outer iteration. Heuristic schedules sum exactly to
// total_budget; the open-loop entry is 2 per outer iteration (one sweep per
// probed branch) over min(outer_count, total_budget / 2) iterations.
std::vector<int> allocation_schedule(const Strategy& strategy, int total_budget, int outer_count);

// Drops clusters with (numerically) zero mass; merges clusters below n_min
// into the surviving cluster with the nearest infectivity matrix (Frobenius).
// Never drops the last cluster. Refreshes counts and alpha.
void prune_clusters(MixtureModel& model, Responsibilities& resp, PointParams& points, double n_min,
                    double alpha0);

struct McmcOutcome {
    enum class Move { None, Merge, Split };
    Move move = Move::None;
    bool accepted = false;
    double log_accept = 0.0;
};

// Parameter transforms behind the merge/split moves, exposed so the
// mean-preservation identity pi1 A1 + pi2 A2 = pi A (and its mu analogue)
// can be driven directly. merge combines clusters k1, k2 of `points` with
// pi-weights proportional to counts[k1], counts[k2]; split maps cluster k to
// children scaled by 1/(2a) and 1/(2(1-a)).
HawkesParams merge_point_params(const PointParams& points, const std::vector<double>& counts,
                                int k1, int k2);
std::pair<HawkesParams, HawkesParams> split_point_params(const PointParams& points, int k,
                                                         double a_frac);

// One merge/split proposal on the point estimates (merge probability 0.5, 0
// at K=1). Acceptance combines the mixture-likelihood ratio with the
// symmetric-Dirichlet partition marginal as the cross-dimension prior factor;
// on acceptance the responsibilities columns are merged/split alongside and B,
// Sigma, alpha are refreshed from the moved state.
McmcOutcome mcmc_move(MixtureModel& model, Responsibilities& resp, PointParams& points,
                      const Corpus& corpus, const CorpusCache& cache, Rng& rng, double alpha0);

// Random initial state, exposed so tests can permute cluster indices.
struct InitState {
    Responsibilities resp;           // rows ~ Dirichlet(1, ..., 1)
    std::vector<double> rayleigh_b;  // K*C, uniform [0.1, 1]
    std::vector<double> exp_sigma;   // K*C*C*D, uniform [0.01, 0.1]
};
InitState draw_init(std::size_t num_sequences, int num_clusters, int num_types, int num_basis,
                    Rng& rng);

FitReport fit(const Corpus& corpus, const FitConfig& config);
FitReport fit_with_init(const Corpus& corpus, const FitConfig& config, const BasisSet& basis,
                        const InitState& init);

struct AssignResult {
    std::vector<int> labels;  // argmax per row, ties to the lower index
    Responsibilities resp;
};
AssignResult assign(const MixtureModel& model, const Corpus& corpus);

}  // namespace hawkesmix
