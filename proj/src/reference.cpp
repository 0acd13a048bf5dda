#include "hawkesmix/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hawkesmix/common.hpp"
#include "hawkesmix/hawkes.hpp"

namespace hawkesmix::reference {

namespace {

// Expected intensity and its variance at event i of seq under cluster k of
// the variational posterior, computed pair by pair from the basis.
void posterior_intensity_moments(const MixtureModel& model, int k, const EventSequence& seq,
                                 std::size_t i, const BasisSet& basis, double* mean, double* var) {
    const int ci = seq.events[i].type;
    const double beta = model.beta(k, ci);
    double m = kSqrtHalfPi * beta;
    double v = kRayleighVarFactor * beta * beta;
    for (std::size_t j = 0; j < i; ++j) {
        const double dt = seq.events[i].time - seq.events[j].time;
        const int cj = seq.events[j].type;
        for (int d = 0; d < basis.count; ++d) {
            const double term = model.sigma(k, ci, cj, d) * basis.value(d, dt);
            m += term;
            v += term * term;
        }
    }
    *mean = m;
    *var = v;
}

}  // namespace

Responsibilities e_step(const MixtureModel& model, const Corpus& corpus, const BasisSet& basis) {
    const int k_count = model.num_clusters;
    const int c_count = model.num_types;
    const double alpha_sum = std::accumulate(model.alpha.begin(), model.alpha.end(), 0.0);

    Responsibilities resp;
    resp.num_sequences = corpus.size();
    resp.num_clusters = k_count;
    resp.weights.assign(corpus.size() * k_count, 0.0);

    for (std::size_t n = 0; n < corpus.size(); ++n) {
        const EventSequence& s = corpus.sequences[n];
        std::vector<double> log_rho(k_count);
        for (int k = 0; k < k_count; ++k) {
            double acc = digamma(model.alpha[k]) - digamma(alpha_sum);
            for (std::size_t i = 0; i < s.events.size(); ++i) {
                double mean = 0.0, var = 0.0;
                posterior_intensity_moments(model, k, s, i, basis, &mean, &var);
                acc += std::log(mean) - var / (2.0 * mean * mean);
            }
            for (int c = 0; c < c_count; ++c) {
                acc -= s.horizon * kSqrtHalfPi * model.beta(k, c);
                for (std::size_t i = 0; i < s.events.size(); ++i) {
                    const int cp = s.events[i].type;
                    for (int d = 0; d < basis.count; ++d)
                        acc -= model.sigma(k, c, cp, d) * basis.integral(d, s.horizon - s.events[i].time);
                }
            }
            log_rho[k] = acc;
        }
        const double shift = *std::max_element(log_rho.begin(), log_rho.end());
        double norm = 0.0;
        for (int k = 0; k < k_count; ++k) {
            resp.weights[n * k_count + k] = std::exp(log_rho[k] - shift);
            norm += resp.weights[n * k_count + k];
        }
        for (int k = 0; k < k_count; ++k) resp.weights[n * k_count + k] /= norm;
    }
    resp.recount();
    return resp;
}

std::vector<double> cluster_log_likelihood_matrix(const PointParams& points, const Corpus& corpus,
                                                  const BasisSet& basis) {
    const int k_count = points.num_clusters;
    std::vector<double> loglik(corpus.size() * k_count);
    for (int k = 0; k < k_count; ++k) {
        const HawkesParams params = points.cluster(k);
        for (std::size_t n = 0; n < corpus.size(); ++n)
            loglik[n * k_count + k] = log_likelihood(params, basis, corpus.sequences[n]);
    }
    return loglik;
}

double mixture_nll(const PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                   const BasisSet& basis) {
    const int k_count = points.num_clusters;
    const auto loglik = cluster_log_likelihood_matrix(points, corpus, basis);
    const double total = std::accumulate(resp.counts.begin(), resp.counts.end(), 0.0);
    double nll = 0.0;
    for (std::size_t n = 0; n < corpus.size(); ++n) {
        double best = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_count; ++k)
            if (resp.counts[k] > 0.0)
                best = std::max(best, std::log(resp.counts[k] / total) + loglik[n * k_count + k]);
        double s = 0.0;
        for (int k = 0; k < k_count; ++k)
            if (resp.counts[k] > 0.0)
                s += std::exp(std::log(resp.counts[k] / total) + loglik[n * k_count + k] - best);
        nll -= best + std::log(s);
    }
    return nll;
}

void inner_m_iteration(PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                       const BasisSet& basis, const MixtureModel& priors) {
    const int k_count = points.num_clusters;
    const int c_count = points.num_types;
    const int d_count = points.num_basis;

    for (int k = 0; k < k_count; ++k) {
        // Latent-attribution statistics at the incoming point, one plain pass.
        std::vector<double> sum_rt(c_count, 0.0);        // sum_n r T (same for all c)
        std::vector<double> sum_invlam(c_count, 0.0);    // per c: sum r / lambda_i over type-c events
        std::vector<double> sum_wg(static_cast<std::size_t>(c_count) * c_count * d_count, 0.0);
        std::vector<double> sum_gmass(static_cast<std::size_t>(c_count) * d_count, 0.0);
        for (std::size_t n = 0; n < corpus.size(); ++n) {
            const EventSequence& s = corpus.sequences[n];
            const double r = resp.at(n, k);
            for (int c = 0; c < c_count; ++c) sum_rt[c] += r * s.horizon;
            for (std::size_t i = 0; i < s.events.size(); ++i) {
                const int cp = s.events[i].type;
                for (int d = 0; d < d_count; ++d)
                    sum_gmass[static_cast<std::size_t>(cp) * d_count + d] +=
                        r * basis.integral(d, s.horizon - s.events[i].time);
                double lam = points.at_mu(k, cp);
                for (std::size_t j = 0; j < i; ++j)
                    for (int d = 0; d < d_count; ++d)
                        lam += points.a(k, cp, s.events[j].type, d) *
                               basis.value(d, s.events[i].time - s.events[j].time);
                const double w = r / lam;
                sum_invlam[cp] += w;
                for (std::size_t j = 0; j < i; ++j) {
                    const int cj = s.events[j].type;
                    for (int d = 0; d < d_count; ++d)
                        sum_wg[(static_cast<std::size_t>(cp) * c_count + cj) * d_count + d] +=
                            w * basis.value(d, s.events[i].time - s.events[j].time);
                }
            }
        }
        for (int c = 0; c < c_count; ++c) {
            const double beta = priors.beta(k, c);
            const double qa = 1.0 / (beta * beta);
            const double qb = sum_rt[c];
            const double qc = -1.0 - points.at_mu(k, c) * sum_invlam[c];
            points.at_mu(k, c) = -2.0 * qc / (qb + std::sqrt(qb * qb - 4.0 * qa * qc));
        }
        for (int c = 0; c < c_count; ++c)
            for (int cp = 0; cp < c_count; ++cp)
                for (int d = 0; d < d_count; ++d) {
                    const double a_cur = points.a(k, c, cp, d);
                    if (a_cur == 0.0) continue;
                    const double numer =
                        a_cur * sum_wg[(static_cast<std::size_t>(c) * c_count + cp) * d_count + d];
                    const double denom = 1.0 / priors.sigma(k, c, cp, d) +
                                         sum_gmass[static_cast<std::size_t>(cp) * d_count + d];
                    points.a(k, c, cp, d) = numer / denom;
                }
    }
}

}  // namespace hawkesmix::reference
