#include "hawkesmix/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "hawkesmix/common.hpp"
#include "hawkesmix/parallel.hpp"

namespace hawkesmix {

namespace {

constexpr double kScaleFloor = 1e-8;
constexpr double kSparseSkip = 1e-10;  // coefficient rows below this add nothing
constexpr double kEmptyCount = 1e-9;   // effective count treated as an empty cluster

double positive_or_throw(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0)
        throw std::runtime_error(std::string("inference: non-positive ") + what);
    return v;
}

}  // namespace

Responsibilities e_step(const MixtureModel& model, const Corpus& corpus, const CorpusCache& cache) {
    const std::size_t n_count = corpus.size();
    const int k_count = model.num_clusters;
    const int c_count = model.num_types;
    const int d_count = model.num_basis;
    if (corpus.num_types != c_count) throw invalid_input("e_step: corpus/model type count mismatch");

    const double alpha_sum = std::accumulate(model.alpha.begin(), model.alpha.end(), 0.0);
    std::vector<double> e_log_pi(k_count);
    for (int k = 0; k < k_count; ++k) e_log_pi[k] = digamma(model.alpha[k]) - digamma(alpha_sum);

    Responsibilities resp;
    resp.num_sequences = n_count;
    resp.num_clusters = k_count;
    resp.weights.assign(n_count * k_count, 0.0);

    const std::size_t pair_stride = static_cast<std::size_t>(c_count) * d_count;
    parallel_for(n_count, [&](std::size_t n) {
        const EventSequence& s = corpus.sequences[n];
        const SequenceCache& sc = cache.seq[n];
        const std::size_t m = s.events.size();
        std::vector<double> log_rho(k_count);
        for (int k = 0; k < k_count; ++k) {
            double acc = e_log_pi[k];
            // event terms: log E[lambda] - Var[lambda] / (2 E^2)
            for (std::size_t i = 0; i < m; ++i) {
                const int ci = s.events[i].type;
                const double beta = model.beta(k, ci);
                double mean = kSqrtHalfPi * beta;
                double var = kRayleighVarFactor * beta * beta;
                const double* g = sc.pair_g.data() + sc.pair_offset(i, d_count);
                const double* sig_row =
                    model.exp_sigma.data() + (static_cast<std::size_t>(k) * c_count + ci) * pair_stride;
                for (std::size_t j = 0; j < i; ++j) {
                    const double* sig = sig_row + static_cast<std::size_t>(s.events[j].type) * d_count;
                    const double* gj = g + j * d_count;
                    for (int d = 0; d < d_count; ++d) {
                        const double term = sig[d] * gj[d];
                        mean += term;
                        var += term * term;
                    }
                }
                acc += std::log(mean) - var / (2.0 * mean * mean);
            }
            // compensator expectation
            for (int c = 0; c < c_count; ++c) {
                acc -= s.horizon * kSqrtHalfPi * model.beta(k, c);
                const double* sig_row =
                    model.exp_sigma.data() + (static_cast<std::size_t>(k) * c_count + c) * pair_stride;
                double mass = 0.0;
                for (std::size_t p = 0; p < pair_stride; ++p) mass += sig_row[p] * sc.type_mass[p];
                acc -= mass;
            }
            if (!std::isfinite(acc))
                throw std::runtime_error("e_step: non-finite log rho at sequence " +
                                         std::to_string(n) + ", cluster " + std::to_string(k));
            log_rho[k] = acc;
        }
        const double shift = *std::max_element(log_rho.begin(), log_rho.end());
        double norm = 0.0;
        for (int k = 0; k < k_count; ++k) {
            const double w = std::exp(log_rho[k] - shift);
            resp.weights[n * k_count + k] = w;
            norm += w;
        }
        for (int k = 0; k < k_count; ++k) resp.weights[n * k_count + k] /= norm;
    });
    resp.recount();
    return resp;
}

std::vector<double> cluster_log_likelihood_matrix(const PointParams& points, const Corpus& corpus,
                                                  const CorpusCache& cache) {
    const std::size_t n_count = corpus.size();
    const int k_count = points.num_clusters;
    const int c_count = points.num_types;
    const int d_count = points.num_basis;
    std::vector<double> loglik(n_count * k_count);
    const std::size_t pair_stride = static_cast<std::size_t>(c_count) * d_count;
    parallel_for(n_count, [&](std::size_t n) {
        const EventSequence& s = corpus.sequences[n];
        const SequenceCache& sc = cache.seq[n];
        const std::size_t m = s.events.size();
        for (int k = 0; k < k_count; ++k) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const int ci = s.events[i].type;
                double lam = points.at_mu(k, ci);
                const double* g = sc.pair_g.data() + sc.pair_offset(i, d_count);
                const double* a_row =
                    points.coeffs.data() + (static_cast<std::size_t>(k) * c_count + ci) * pair_stride;
                for (std::size_t j = 0; j < i; ++j) {
                    const double* a = a_row + static_cast<std::size_t>(s.events[j].type) * d_count;
                    const double* gj = g + j * d_count;
                    for (int d = 0; d < d_count; ++d) lam += a[d] * gj[d];
                }
                acc += std::log(positive_or_throw(lam, "intensity in likelihood"));
            }
            for (int c = 0; c < c_count; ++c) {
                acc -= s.horizon * points.at_mu(k, c);
                const double* a_row =
                    points.coeffs.data() + (static_cast<std::size_t>(k) * c_count + c) * pair_stride;
                double mass = 0.0;
                for (std::size_t p = 0; p < pair_stride; ++p) mass += a_row[p] * sc.type_mass[p];
                acc -= mass;
            }
            loglik[n * k_count + k] = acc;
        }
    });
    return loglik;
}

double mixture_nll_from_loglik(const std::vector<double>& loglik, const std::vector<double>& counts) {
    const int k_count = static_cast<int>(counts.size());
    const std::size_t n_count = loglik.size() / k_count;
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> log_pi(k_count, -std::numeric_limits<double>::infinity());
    for (int k = 0; k < k_count; ++k)
        if (counts[k] > 0.0) log_pi[k] = std::log(counts[k] / total);
    double nll = 0.0;
    blocked_reduce(n_count, 1, &nll, [&](std::size_t n, double* buf) {
        const double* row = loglik.data() + n * k_count;
        double shift = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_count; ++k)
            if (counts[k] > 0.0) shift = std::max(shift, log_pi[k] + row[k]);
        double s = 0.0;
        for (int k = 0; k < k_count; ++k)
            if (counts[k] > 0.0) s += std::exp(log_pi[k] + row[k] - shift);
        buf[0] -= shift + std::log(s);
    });
    if (!std::isfinite(nll)) throw std::runtime_error("mixture_nll: non-finite value");
    return nll;
}

double mixture_nll(const PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                   const CorpusCache& cache) {
    return mixture_nll_from_loglik(cluster_log_likelihood_matrix(points, corpus, cache), resp.counts);
}

PointParams prior_mean_points(const MixtureModel& model) {
    PointParams points;
    points.num_clusters = model.num_clusters;
    points.num_types = model.num_types;
    points.num_basis = model.num_basis;
    points.mu.resize(model.rayleigh_b.size());
    for (std::size_t i = 0; i < points.mu.size(); ++i) points.mu[i] = kSqrtHalfPi * model.rayleigh_b[i];
    points.coeffs = model.exp_sigma;
    return points;
}

namespace {

// Weighted statistics of one inner sweep, accumulated in a fixed blocked
// order. Per-cluster block layout:
//   [0]                       sum_n r T_n
//   [1 .. C]                  per c: sum r sum_{i:c_i=c} 1/lambda_i
//   [1+C .. 1+C+C^2 D)        per (c, cp, d): sum r sum g / lambda_i
//   [1+C+C^2 D .. +C D)       per (cp, d): sum r type_mass
struct SweepStats {
    int k_count, c_count, d_count;
    std::size_t stride;
    std::vector<double> data;

    SweepStats(int k, int c, int d)
        : k_count(k), c_count(c), d_count(d),
          stride(1 + c + static_cast<std::size_t>(c) * c * d + static_cast<std::size_t>(c) * d),
          data(static_cast<std::size_t>(k) * stride, 0.0) {}

    static std::size_t off_rt() { return 0; }
    std::size_t off_invlam(int c) const { return 1 + c; }
    std::size_t off_wg(int c, int cp, int d) const {
        return 1 + c_count + (static_cast<std::size_t>(c) * c_count + cp) * d_count + d;
    }
    std::size_t off_gw(int cp, int d) const {
        return 1 + c_count + static_cast<std::size_t>(c_count) * c_count * d_count +
               static_cast<std::size_t>(cp) * d_count + d;
    }
};

void accumulate_sweep_stats(SweepStats& stats, const PointParams& points,
                            const Responsibilities& resp, const Corpus& corpus,
                            const CorpusCache& cache) {
    const int k_count = stats.k_count;
    const int c_count = stats.c_count;
    const int d_count = stats.d_count;
    const std::size_t pair_stride = static_cast<std::size_t>(c_count) * d_count;

    // Rows of A that are entirely below the sparsity cutoff contribute nothing
    // to lambda and leave their coefficients at zero, so their statistics are
    // never consumed.
    std::vector<unsigned char> row_active(static_cast<std::size_t>(k_count) * c_count * c_count);
    for (int k = 0; k < k_count; ++k)
        for (int c = 0; c < c_count; ++c)
            for (int cp = 0; cp < c_count; ++cp) {
                bool active = false;
                for (int d = 0; d < d_count && !active; ++d)
                    active = points.a(k, c, cp, d) >= kSparseSkip;
                row_active[(static_cast<std::size_t>(k) * c_count + c) * c_count + cp] = active;
            }

    blocked_reduce(corpus.size(), stats.data.size(), stats.data.data(),
                   [&](std::size_t n, double* buf) {
        const EventSequence& s = corpus.sequences[n];
        const SequenceCache& sc = cache.seq[n];
        const std::size_t m = s.events.size();
        for (int k = 0; k < k_count; ++k) {
            const double r = resp.at(n, k);
            if (r == 0.0) continue;
            double* block = buf + static_cast<std::size_t>(k) * stats.stride;
            block[SweepStats::off_rt()] += r * s.horizon;
            for (std::size_t p = 0; p < pair_stride; ++p)
                block[stats.off_gw(0, 0) + p] += r * sc.type_mass[p];
            const unsigned char* active_rows =
                row_active.data() + static_cast<std::size_t>(k) * c_count * c_count;
            for (std::size_t i = 0; i < m; ++i) {
                const int ci = s.events[i].type;
                double lam = points.at_mu(k, ci);
                const double* g = sc.pair_g.data() + sc.pair_offset(i, d_count);
                const double* a_row =
                    points.coeffs.data() + (static_cast<std::size_t>(k) * c_count + ci) * pair_stride;
                for (std::size_t j = 0; j < i; ++j) {
                    const int cj = s.events[j].type;
                    if (!active_rows[static_cast<std::size_t>(ci) * c_count + cj]) continue;
                    const double* a = a_row + static_cast<std::size_t>(cj) * d_count;
                    const double* gj = g + j * d_count;
                    for (int d = 0; d < d_count; ++d) lam += a[d] * gj[d];
                }
                const double w = r / lam;
                block[stats.off_invlam(ci)] += w;
                for (std::size_t j = 0; j < i; ++j) {
                    const int cj = s.events[j].type;
                    if (!active_rows[static_cast<std::size_t>(ci) * c_count + cj]) continue;
                    double* wg = block + stats.off_wg(ci, cj, 0);
                    const double* gj = g + j * d_count;
                    for (int d = 0; d < d_count; ++d) wg[d] += w * gj[d];
                }
            }
        }
    });
}

}  // namespace

void inner_m_iteration(PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                       const CorpusCache& cache, const MixtureModel& priors,
                       InnerDiagnostics* diag) {
    const int k_count = points.num_clusters;
    const int c_count = points.num_types;
    const int d_count = points.num_basis;
    SweepStats stats(k_count, c_count, d_count);
    accumulate_sweep_stats(stats, points, resp, corpus, cache);

    if (diag) {
        diag->quad_a.assign(static_cast<std::size_t>(k_count) * c_count, 0.0);
        diag->quad_b.assign(static_cast<std::size_t>(k_count) * c_count, 0.0);
        diag->quad_c.assign(static_cast<std::size_t>(k_count) * c_count, 0.0);
    }

    for (int k = 0; k < k_count; ++k) {
        const double* block = stats.data.data() + static_cast<std::size_t>(k) * stats.stride;
        for (int c = 0; c < c_count; ++c) {
            const double beta = priors.beta(k, c);
            const double qa = 1.0 / (beta * beta);
            const double qb = block[SweepStats::off_rt()];
            const double qc = -1.0 - points.at_mu(k, c) * block[stats.off_invlam(c)];
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc < 0.0)
                throw std::logic_error("inner_m_iteration: negative discriminant (qc <= -1 violated)");
            // -2 qc / (qb + sqrt(disc)) is the stable form of the positive
            // quadratic root: every summand is positive, no cancellation.
            const double root = -2.0 * qc / (qb + std::sqrt(disc));
            if (diag) {
                const std::size_t idx = static_cast<std::size_t>(k) * c_count + c;
                diag->quad_a[idx] = qa;
                diag->quad_b[idx] = qb;
                diag->quad_c[idx] = qc;
            }
            points.at_mu(k, c) = positive_or_throw(root, "mu update");
        }
        for (int c = 0; c < c_count; ++c)
            for (int cp = 0; cp < c_count; ++cp)
                for (int d = 0; d < d_count; ++d) {
                    const double a_cur = points.a(k, c, cp, d);
                    if (a_cur == 0.0) continue;
                    const double numer = a_cur * block[stats.off_wg(c, cp, d)];
                    const double denom = 1.0 / priors.sigma(k, c, cp, d) + block[stats.off_gw(cp, d)];
                    points.a(k, c, cp, d) = numer / denom;
                }
    }
}

double map_objective(const PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                     const CorpusCache& cache, const MixtureModel& priors) {
    double prior_term = 0.0;
    const int k_count = points.num_clusters;
    const int c_count = points.num_types;
    const int d_count = points.num_basis;
    for (int k = 0; k < k_count; ++k) {
        for (int c = 0; c < c_count; ++c) {
            const double beta = priors.beta(k, c);
            const double m = points.at_mu(k, c);
            prior_term += std::log(m) - 2.0 * std::log(beta) - m * m / (2.0 * beta * beta);
        }
        for (int c = 0; c < c_count; ++c)
            for (int cp = 0; cp < c_count; ++cp)
                for (int d = 0; d < d_count; ++d) {
                    const double sigma = priors.sigma(k, c, cp, d);
                    prior_term += -std::log(sigma) - points.a(k, c, cp, d) / sigma;
                }
    }
    const auto loglik = cluster_log_likelihood_matrix(points, corpus, cache);
    double data_term = 0.0;
    blocked_reduce(corpus.size(), 1, &data_term, [&](std::size_t n, double* buf) {
        for (int k = 0; k < k_count; ++k) buf[0] += resp.at(n, k) * loglik[n * k_count + k];
    });
    return prior_term + data_term;
}

PointParams m_step(const Responsibilities& resp, const Corpus& corpus, const CorpusCache& cache,
                   const MixtureModel& priors, int n_inner, double* objective) {
    if (n_inner < 1) throw invalid_input("m_step: n_inner must be >= 1");
    PointParams points = prior_mean_points(priors);
    for (int s = 0; s < n_inner; ++s) inner_m_iteration(points, resp, corpus, cache, priors);
    if (objective) *objective = map_objective(points, resp, corpus, cache, priors);
    return points;
}

void refresh_hyperparams(MixtureModel& model, const PointParams& points,
                         const Responsibilities& resp, double alpha0) {
    const int k_count = model.num_clusters;
    model.rayleigh_b.resize(points.mu.size());
    for (std::size_t i = 0; i < points.mu.size(); ++i)
        model.rayleigh_b[i] = std::max(points.mu[i] / kSqrtHalfPi, kScaleFloor);
    model.exp_sigma.resize(points.coeffs.size());
    for (std::size_t i = 0; i < points.coeffs.size(); ++i)
        model.exp_sigma[i] = std::max(points.coeffs[i], kScaleFloor);
    model.alpha.resize(k_count);
    for (int k = 0; k < k_count; ++k) model.alpha[k] = alpha0 / k_count + resp.counts[k];
}

std::vector<int> allocation_schedule(const Strategy& strategy, int total_budget, int outer_count) {
    if (outer_count < 1) throw invalid_input("allocation_schedule: outer_count must be >= 1");
    if (strategy.kind != Strategy::Kind::OpenLoop && total_budget < outer_count)
        throw invalid_input("allocation_schedule: budget " + std::to_string(total_budget) +
                            " below outer count " + std::to_string(outer_count));
    switch (strategy.kind) {
        case Strategy::Kind::OpenLoop: {
            // Truncates to the affordable prefix instead of failing: every
            // probed iteration costs exactly two sweeps.
            if (total_budget < 2)
                throw invalid_input("allocation_schedule: open loop needs a budget of >= 2");
            return std::vector<int>(std::min(outer_count, total_budget / 2), 2);
        }
        case Strategy::Kind::Constant: {
            std::vector<int> schedule(outer_count, total_budget / outer_count);
            const int rem = total_budget % outer_count;
            for (int i = 0; i < rem; ++i) ++schedule[i];
            return schedule;
        }
        case Strategy::Kind::Increasing:
        case Strategy::Kind::Decreasing: {
            const int lo = strategy.low, hi = strategy.high;
            if (lo < 1 || hi < lo) throw invalid_input("allocation_schedule: need 1 <= low <= high");
            if (outer_count == 1) {
                if (total_budget < lo || total_budget > hi)
                    throw invalid_input("allocation_schedule: single-entry ramp cannot meet budget");
                return {total_budget};
            }
            const long min_sum = static_cast<long>(lo) * (outer_count - 1) + hi;
            const long max_sum = static_cast<long>(lo) + static_cast<long>(hi) * (outer_count - 1);
            if (total_budget < min_sum || total_budget > max_sum)
                throw invalid_input("allocation_schedule: ramp " + std::to_string(lo) + ".." +
                                    std::to_string(hi) + " over " + std::to_string(outer_count) +
                                    " outers cannot sum to " + std::to_string(total_budget));
            std::vector<int> schedule(outer_count);
            for (int i = 0; i < outer_count; ++i)
                schedule[i] = static_cast<int>(std::lround(
                    lo + static_cast<double>(hi - lo) * i / (outer_count - 1)));
            long diff = total_budget - std::accumulate(schedule.begin(), schedule.end(), 0L);
            while (diff > 0) {
                bool moved = false;
                for (int i = 1; i < outer_count - 1 && diff > 0; ++i)
                    if (schedule[i] < schedule[i + 1]) {
                        ++schedule[i];
                        --diff;
                        moved = true;
                    }
                if (!moved) throw std::logic_error("allocation_schedule: cannot raise ramp");
            }
            while (diff < 0) {
                bool moved = false;
                for (int i = outer_count - 2; i >= 1 && diff < 0; --i)
                    if (schedule[i] > schedule[i - 1]) {
                        --schedule[i];
                        ++diff;
                        moved = true;
                    }
                if (!moved) throw std::logic_error("allocation_schedule: cannot lower ramp");
            }
            if (strategy.kind == Strategy::Kind::Decreasing)
                std::reverse(schedule.begin(), schedule.end());
            return schedule;
        }
    }
    throw std::logic_error("allocation_schedule: unknown strategy");
}

namespace {

// Rebuilds model/points/resp keeping the clusters listed in `keep` (in that
// order); responsibilities rows renormalized afterwards.
void keep_clusters(MixtureModel& model, Responsibilities& resp, PointParams& points,
                   const std::vector<int>& keep) {
    const int c_count = model.num_types;
    const int d_count = model.num_basis;
    const int new_k = static_cast<int>(keep.size());
    const std::size_t block = static_cast<std::size_t>(c_count) * c_count * d_count;

    MixtureModel nm = model;
    nm.num_clusters = new_k;
    nm.alpha.resize(new_k);
    nm.rayleigh_b.assign(static_cast<std::size_t>(new_k) * c_count, 0.0);
    nm.exp_sigma.assign(static_cast<std::size_t>(new_k) * block, 0.0);
    PointParams np;
    np.num_clusters = new_k;
    np.num_types = c_count;
    np.num_basis = d_count;
    np.mu.assign(static_cast<std::size_t>(new_k) * c_count, 0.0);
    np.coeffs.assign(static_cast<std::size_t>(new_k) * block, 0.0);
    for (int t = 0; t < new_k; ++t) {
        const int k = keep[t];
        nm.alpha[t] = model.alpha[k];
        std::copy_n(model.rayleigh_b.begin() + static_cast<std::ptrdiff_t>(k) * c_count, c_count,
                    nm.rayleigh_b.begin() + static_cast<std::ptrdiff_t>(t) * c_count);
        std::copy_n(model.exp_sigma.begin() + static_cast<std::ptrdiff_t>(k * block), block,
                    nm.exp_sigma.begin() + static_cast<std::ptrdiff_t>(t * block));
        std::copy_n(points.mu.begin() + static_cast<std::ptrdiff_t>(k) * c_count, c_count,
                    np.mu.begin() + static_cast<std::ptrdiff_t>(t) * c_count);
        std::copy_n(points.coeffs.begin() + static_cast<std::ptrdiff_t>(k * block), block,
                    np.coeffs.begin() + static_cast<std::ptrdiff_t>(t * block));
    }

    Responsibilities nr;
    nr.num_sequences = resp.num_sequences;
    nr.num_clusters = new_k;
    nr.weights.assign(resp.num_sequences * new_k, 0.0);
    for (std::size_t n = 0; n < resp.num_sequences; ++n) {
        double row_sum = 0.0;
        for (int t = 0; t < new_k; ++t) {
            const double w = resp.at(n, keep[t]);
            nr.weights[n * new_k + t] = w;
            row_sum += w;
        }
        if (row_sum <= 0.0) {
            for (int t = 0; t < new_k; ++t) nr.weights[n * new_k + t] = 1.0 / new_k;
        } else {
            for (int t = 0; t < new_k; ++t) nr.weights[n * new_k + t] /= row_sum;
        }
    }
    nr.recount();
    model = std::move(nm);
    points = std::move(np);
    resp = std::move(nr);
}

double frobenius_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

void prune_clusters(MixtureModel& model, Responsibilities& resp, PointParams& points, double n_min,
                    double alpha0) {
    const int k_count = model.num_clusters;
    if (k_count <= 1) return;
    resp.recount();

    std::vector<int> survivors;
    for (int k = 0; k < k_count; ++k)
        if (resp.counts[k] >= n_min && resp.counts[k] >= kEmptyCount) survivors.push_back(k);
    if (survivors.empty()) {
        const int best = static_cast<int>(
            std::max_element(resp.counts.begin(), resp.counts.end()) - resp.counts.begin());
        survivors.push_back(best);
    }
    if (static_cast<int>(survivors.size()) == k_count) {
        for (int k = 0; k < k_count; ++k)
            model.alpha[k] = alpha0 / k_count + resp.counts[k];
        return;
    }

    // Small-but-nonempty clusters hand their responsibility mass to the
    // survivor with the nearest infectivity matrix; empty ones just vanish.
    std::vector<std::vector<double>> phi(k_count);
    for (int k = 0; k < k_count; ++k) phi[k] = infectivity(points.cluster(k), model.basis);
    std::vector<bool> keep_flag(k_count, false);
    for (int k : survivors) keep_flag[k] = true;
    for (int k = 0; k < k_count; ++k) {
        if (keep_flag[k] || resp.counts[k] < kEmptyCount) continue;
        int target = survivors.front();
        double best = std::numeric_limits<double>::infinity();
        for (int s : survivors) {
            const double dist = frobenius_distance(phi[k], phi[s]);
            if (dist < best) {
                best = dist;
                target = s;
            }
        }
        for (std::size_t n = 0; n < resp.num_sequences; ++n)
            resp.at(n, target) += resp.at(n, k);
    }
    keep_clusters(model, resp, points, survivors);
    const int new_k = model.num_clusters;
    for (int k = 0; k < new_k; ++k) model.alpha[k] = alpha0 / new_k + resp.counts[k];
}

namespace {

// log density of the symmetric Dirichlet(alpha0/K, ..., alpha0/K) prior on
// the mixing proportions, evaluated at pi_k = N_k / N. This is the prior
// factor a merge or split actually changes: the component parameters move by
// a deterministic transformation whose scale factors are carried along with
// them, so their densities cancel from the acceptance ratio, while the
// mixture dimension enters through pi alone.
double log_mixing_prior(const std::vector<double>& counts, double alpha0) {
    const double k_count = static_cast<double>(counts.size());
    const double per = alpha0 / k_count;
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    double s = std::lgamma(alpha0) - k_count * std::lgamma(per);
    for (double c : counts) s += (per - 1.0) * std::log(c / total);
    return s;
}

std::vector<double> cluster_column_loglik(const HawkesParams& params, const Corpus& corpus,
                                          const CorpusCache& cache) {
    PointParams single;
    single.num_clusters = 1;
    single.num_types = params.num_types;
    single.num_basis = params.num_basis;
    single.mu = params.mu;
    single.coeffs = params.coeffs;
    return cluster_log_likelihood_matrix(single, corpus, cache);
}

}  // namespace

HawkesParams merge_point_params(const PointParams& points, const std::vector<double>& counts,
                                int k1, int k2) {
    const int c_count = points.num_types;
    const int d_count = points.num_basis;
    const std::size_t block = static_cast<std::size_t>(c_count) * c_count * d_count;
    const double mass = counts[k1] + counts[k2];
    const double w1 = mass > 0.0 ? counts[k1] / mass : 0.5;
    const double w2 = mass > 0.0 ? counts[k2] / mass : 0.5;
    HawkesParams merged;
    merged.num_types = c_count;
    merged.num_basis = d_count;
    merged.mu.resize(c_count);
    merged.coeffs.resize(block);
    for (int c = 0; c < c_count; ++c)
        merged.mu[c] = w1 * points.at_mu(k1, c) + w2 * points.at_mu(k2, c);
    const double* a1 = points.coeffs.data() + static_cast<std::size_t>(k1) * block;
    const double* a2 = points.coeffs.data() + static_cast<std::size_t>(k2) * block;
    for (std::size_t p = 0; p < block; ++p) merged.coeffs[p] = w1 * a1[p] + w2 * a2[p];
    return merged;
}

std::pair<HawkesParams, HawkesParams> split_point_params(const PointParams& points, int k,
                                                         double a_frac) {
    const int c_count = points.num_types;
    const int d_count = points.num_basis;
    const std::size_t block = static_cast<std::size_t>(c_count) * c_count * d_count;
    HawkesParams child1, child2;
    child1.num_types = child2.num_types = c_count;
    child1.num_basis = child2.num_basis = d_count;
    child1.mu.resize(c_count);
    child2.mu.resize(c_count);
    child1.coeffs.resize(block);
    child2.coeffs.resize(block);
    const double s1 = 1.0 / (2.0 * a_frac);
    const double s2 = 1.0 / (2.0 * (1.0 - a_frac));
    for (int c = 0; c < c_count; ++c) {
        child1.mu[c] = points.at_mu(k, c) * s1;
        child2.mu[c] = points.at_mu(k, c) * s2;
    }
    const double* ak = points.coeffs.data() + static_cast<std::size_t>(k) * block;
    for (std::size_t p = 0; p < block; ++p) {
        child1.coeffs[p] = ak[p] * s1;
        child2.coeffs[p] = ak[p] * s2;
    }
    return {std::move(child1), std::move(child2)};
}

McmcOutcome mcmc_move(MixtureModel& model, Responsibilities& resp, PointParams& points,
                      const Corpus& corpus, const CorpusCache& cache, Rng& rng, double alpha0) {
    McmcOutcome out;
    const int k_count = model.num_clusters;
    const int c_count = model.num_types;
    const int d_count = model.num_basis;
    const std::size_t n_count = resp.num_sequences;
    const std::size_t block = static_cast<std::size_t>(c_count) * c_count * d_count;
    resp.recount();
    const double n_total = std::accumulate(resp.counts.begin(), resp.counts.end(), 0.0);
    // A massless cluster has no well-defined mixing proportion; leave it to
    // pruning rather than evaluating the prior at pi = 0.
    for (double c : resp.counts)
        if (c <= 0.0) return out;

    const bool merge = k_count >= 2 && rng.uniform() < 0.5;
    const auto loglik = cluster_log_likelihood_matrix(points, corpus, cache);

    auto mixture_delta = [&](const std::vector<int>& replaced,
                             const std::vector<const double*>& new_cols,
                             const std::vector<double>& new_pi) {
        // Change in total mixture log-likelihood when `replaced` clusters give
        // way to new_cols with weights new_pi; untouched weights stay N_k/N.
        std::vector<bool> gone(k_count, false);
        for (int k : replaced) gone[k] = true;
        double delta = 0.0;
        for (std::size_t n = 0; n < n_count; ++n) {
            const double* row = loglik.data() + n * k_count;
            double old_best = -std::numeric_limits<double>::infinity();
            double new_best = old_best;
            for (int k = 0; k < k_count; ++k) {
                if (resp.counts[k] <= 0.0) continue;
                const double v = std::log(resp.counts[k] / n_total) + row[k];
                old_best = std::max(old_best, v);
                if (!gone[k]) new_best = std::max(new_best, v);
            }
            for (std::size_t t = 0; t < new_cols.size(); ++t)
                if (new_pi[t] > 0.0)
                    new_best = std::max(new_best, std::log(new_pi[t]) + new_cols[t][n]);
            double old_sum = 0.0, new_sum = 0.0;
            for (int k = 0; k < k_count; ++k) {
                if (resp.counts[k] <= 0.0) continue;
                const double v = std::log(resp.counts[k] / n_total) + row[k];
                old_sum += std::exp(v - old_best);
                if (!gone[k]) new_sum += std::exp(v - new_best);
            }
            for (std::size_t t = 0; t < new_cols.size(); ++t)
                if (new_pi[t] > 0.0)
                    new_sum += std::exp(std::log(new_pi[t]) + new_cols[t][n] - new_best);
            delta += (new_best + std::log(new_sum)) - (old_best + std::log(old_sum));
        }
        return delta;
    };

    if (merge) {
        out.move = McmcOutcome::Move::Merge;
        int k1 = static_cast<int>(rng.below(k_count));
        int k2 = static_cast<int>(rng.below(k_count - 1));
        if (k2 >= k1) ++k2;
        const double pi1 = resp.counts[k1] / n_total;
        const double pi2 = resp.counts[k2] / n_total;
        const double pim = pi1 + pi2;
        const HawkesParams merged = merge_point_params(points, resp.counts, k1, k2);
        const auto merged_ll = cluster_column_loglik(merged, corpus, cache);
        const double delta_ll = mixture_delta({k1, k2}, {merged_ll.data()}, {pim});

        std::vector<double> counts_new;
        for (int k = 0; k < k_count; ++k)
            if (k != k1 && k != k2) counts_new.push_back(resp.counts[k]);
        counts_new.push_back(resp.counts[k1] + resp.counts[k2]);
        const double delta_prior =
            log_mixing_prior(counts_new, alpha0) - log_mixing_prior(resp.counts, alpha0);

        out.log_accept = delta_ll + delta_prior;
        if (std::log(rng.uniform_pos()) < out.log_accept) {
            out.accepted = true;
            // Put the merged cluster in k1's slot, drop k2.
            for (int c = 0; c < c_count; ++c) points.at_mu(k1, c) = merged.mu[c];
            std::copy_n(merged.coeffs.begin(), block,
                        points.coeffs.begin() + static_cast<std::ptrdiff_t>(k1) * block);
            for (std::size_t n = 0; n < n_count; ++n) resp.at(n, k1) += resp.at(n, k2);
            std::vector<int> keep;
            for (int k = 0; k < k_count; ++k)
                if (k != k2) keep.push_back(k);
            keep_clusters(model, resp, points, keep);
            refresh_hyperparams(model, points, resp, alpha0);
        }
        return out;
    }

    out.move = McmcOutcome::Move::Split;
    const int k = static_cast<int>(rng.below(k_count));
    double a_frac = 0.0;
    bool drew = false;
    for (int attempt = 0; attempt < 100 && !drew; ++attempt) {
        a_frac = rng.uniform();
        drew = a_frac > 1e-6 && a_frac < 1.0 - 1e-6;
    }
    if (!drew) {
        out.move = McmcOutcome::Move::None;
        return out;
    }

    const double pik = resp.counts[k] / n_total;
    const auto [child1, child2] = split_point_params(points, k, a_frac);
    const auto ll1 = cluster_column_loglik(child1, corpus, cache);
    const auto ll2 = cluster_column_loglik(child2, corpus, cache);
    const double delta_ll =
        mixture_delta({k}, {ll1.data(), ll2.data()}, {a_frac * pik, (1.0 - a_frac) * pik});

    std::vector<double> counts_new;
    for (int j = 0; j < k_count; ++j)
        if (j != k) counts_new.push_back(resp.counts[j]);
    counts_new.push_back(a_frac * resp.counts[k]);
    counts_new.push_back((1.0 - a_frac) * resp.counts[k]);
    const double delta_prior =
        log_mixing_prior(counts_new, alpha0) - log_mixing_prior(resp.counts, alpha0);

    out.log_accept = delta_ll + delta_prior;
    if (std::log(rng.uniform_pos()) < out.log_accept) {
        out.accepted = true;
        // Child 1 replaces k; child 2 is appended as a new trailing cluster.
        MixtureModel nm = model;
        PointParams np = points;
        Responsibilities nr = resp;
        const int new_k = k_count + 1;
        nm.num_clusters = np.num_clusters = nr.num_clusters = new_k;
        nm.alpha.resize(new_k);
        nm.rayleigh_b.resize(static_cast<std::size_t>(new_k) * c_count);
        nm.exp_sigma.resize(static_cast<std::size_t>(new_k) * block);
        np.mu.resize(static_cast<std::size_t>(new_k) * c_count);
        np.coeffs.resize(static_cast<std::size_t>(new_k) * block);
        for (int c = 0; c < c_count; ++c) {
            np.at_mu(k, c) = child1.mu[c];
            np.at_mu(k_count, c) = child2.mu[c];
        }
        std::copy_n(child1.coeffs.begin(), block,
                    np.coeffs.begin() + static_cast<std::ptrdiff_t>(k) * block);
        std::copy_n(child2.coeffs.begin(), block,
                    np.coeffs.begin() + static_cast<std::ptrdiff_t>(k_count) * block);
        nr.weights.assign(n_count * new_k, 0.0);
        for (std::size_t n = 0; n < n_count; ++n) {
            for (int j = 0; j < k_count; ++j) nr.weights[n * new_k + j] = resp.at(n, j);
            const double w = resp.at(n, k);
            nr.weights[n * new_k + k] = a_frac * w;
            nr.weights[n * new_k + k_count] = (1.0 - a_frac) * w;
        }
        nr.recount();
        model = std::move(nm);
        points = std::move(np);
        resp = std::move(nr);
        refresh_hyperparams(model, points, resp, alpha0);
    }
    return out;
}

InitState draw_init(std::size_t num_sequences, int num_clusters, int num_types, int num_basis,
                    Rng& rng) {
    InitState init;
    init.resp.num_sequences = num_sequences;
    init.resp.num_clusters = num_clusters;
    init.resp.weights.resize(num_sequences * num_clusters);
    for (std::size_t n = 0; n < num_sequences; ++n) {
        double sum = 0.0;
        for (int k = 0; k < num_clusters; ++k) {
            const double e = rng.exponential(1.0);
            init.resp.weights[n * num_clusters + k] = e;
            sum += e;
        }
        for (int k = 0; k < num_clusters; ++k) init.resp.weights[n * num_clusters + k] /= sum;
    }
    init.resp.recount();
    init.rayleigh_b.resize(static_cast<std::size_t>(num_clusters) * num_types);
    for (double& b : init.rayleigh_b) b = 0.1 + 0.9 * rng.uniform();
    init.exp_sigma.resize(static_cast<std::size_t>(num_clusters) * num_types * num_types * num_basis);
    for (double& s : init.exp_sigma) s = 0.01 + 0.09 * rng.uniform();
    return init;
}

FitReport fit(const Corpus& corpus, const FitConfig& config) {
    if (corpus.size() == 0) throw invalid_input("fit: empty corpus");
    const BasisSet basis = select_basis(corpus, config.basis_eps_rel);
    Rng rng(derive_seed(config.seed, {0x1417}));
    const InitState init =
        draw_init(corpus.size(), config.k_init, corpus.num_types, basis.count, rng);
    return fit_with_init(corpus, config, basis, init);
}

FitReport fit_with_init(const Corpus& corpus, const FitConfig& config, const BasisSet& basis,
                        const InitState& init) {
    if (corpus.size() == 0) throw invalid_input("fit: empty corpus");
    if (config.k_init < 1) throw invalid_input("fit: k_init must be >= 1");
    if (config.outer_iters < 1) throw invalid_input("fit: outer_iters must be >= 1");
    const std::size_t c_sz = static_cast<std::size_t>(corpus.num_types);
    if (init.resp.num_sequences != corpus.size() ||
        init.resp.num_clusters != config.k_init ||
        init.rayleigh_b.size() != config.k_init * c_sz ||
        init.exp_sigma.size() != config.k_init * c_sz * c_sz * static_cast<std::size_t>(basis.count))
        throw invalid_input("fit: init state shape does not match corpus/config/basis");
    const CorpusCache cache(corpus, basis);

    MixtureModel model;
    model.num_clusters = config.k_init;
    model.num_types = corpus.num_types;
    model.num_basis = basis.count;
    model.basis = basis;
    model.rayleigh_b = init.rayleigh_b;
    model.exp_sigma = init.exp_sigma;
    Responsibilities resp = init.resp;
    resp.recount();
    model.alpha.resize(config.k_init);
    for (int k = 0; k < config.k_init; ++k)
        model.alpha[k] = config.alpha0 / config.k_init + resp.counts[k];
    model.validate();

    PointParams points = prior_mean_points(model);
    const auto schedule =
        allocation_schedule(config.strategy, config.inner_budget, config.outer_iters);
    const bool open_loop = config.strategy.kind == Strategy::Kind::OpenLoop;
    Rng mcmc_rng(derive_seed(config.seed, {0x3C3C}));

    FitReport report;
    report.config = config;
    double prev_nll = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < schedule.size(); ++it) {
        int inner_used = schedule[it];
        if (open_loop) {
            // Branch 1: continue the inner EM at the current point with the
            // current responsibilities. Branch 2: fresh E-step, restart from
            // the prior means. Keep whichever ends lower.
            PointParams pts1 = points;
            inner_m_iteration(pts1, resp, corpus, cache, model);
            const double l1 = mixture_nll(pts1, resp, corpus, cache);

            Responsibilities resp2 = e_step(model, corpus, cache);
            PointParams pts2 = prior_mean_points(model);
            inner_m_iteration(pts2, resp2, corpus, cache, model);
            const double l2 = mixture_nll(pts2, resp2, corpus, cache);

            if (l1 <= l2) {
                points = std::move(pts1);
            } else {
                points = std::move(pts2);
                resp = std::move(resp2);
            }
        } else {
            resp = e_step(model, corpus, cache);
            points = m_step(resp, corpus, cache, model, inner_used);
        }
        refresh_hyperparams(model, points, resp, config.alpha0);
        prune_clusters(model, resp, points, config.n_min, config.alpha0);
        if (config.mcmc) mcmc_move(model, resp, points, corpus, cache, mcmc_rng, config.alpha0);

        const double nll = mixture_nll(points, resp, corpus, cache);
        report.trace.push_back({static_cast<int>(it), inner_used, nll, model.num_clusters});
        if (config.nll_tol > 0.0 && it > 0 && prev_nll - nll < config.nll_tol) break;
        prev_nll = nll;
    }

    // Final assignments under the final model, matching what assign() yields.
    report.resp = e_step(model, corpus, cache);
    report.labels.resize(corpus.size());
    for (std::size_t n = 0; n < corpus.size(); ++n) {
        int best = 0;
        for (int k = 1; k < model.num_clusters; ++k)
            if (report.resp.at(n, k) > report.resp.at(n, best)) best = k;
        report.labels[n] = best;
    }
    report.model = std::move(model);
    return report;
}

AssignResult assign(const MixtureModel& model, const Corpus& corpus) {
    model.validate();
    const CorpusCache cache(corpus, model.basis);
    AssignResult result;
    result.resp = e_step(model, corpus, cache);
    result.labels.resize(corpus.size());
    for (std::size_t n = 0; n < corpus.size(); ++n) {
        int best = 0;
        for (int k = 1; k < model.num_clusters; ++k)
            if (result.resp.at(n, k) > result.resp.at(n, best)) best = k;
        result.labels[n] = best;
    }
    return result;
}

}  // namespace hawkesmix
