// Timing comparison of the OpenMP inference kernels against the naive serial
// reference on a synthetic corpus, with a cross-check that the two agree.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "hawkesmix/basis.hpp"
#include "hawkesmix/cache.hpp"
#include "hawkesmix/hawkes.hpp"
#include "hawkesmix/inference.hpp"
#include "hawkesmix/parallel.hpp"
#include "hawkesmix/reference.hpp"

using namespace hawkesmix;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    int n_per_cluster = 40, events = 40, c_types = 3, k_clusters = 4, reps = 3;
    if (argc > 1) n_per_cluster = std::atoi(argv[1]);
    if (argc > 2) events = std::atoi(argv[2]);
    if (argc > 3) c_types = std::atoi(argv[3]);
    std::printf("corpus: 2 clusters x %d sequences, %d events each, C=%d; mixture K=%d; "
                "threads=%d\n",
                n_per_cluster, events, c_types, k_clusters, thread_count());

    const SyntheticSuite suite =
        make_synthetic_suite(2, c_types, n_per_cluster, events, ImpactKind::Sine, 42, 0.8);
    const Corpus& corpus = suite.corpus;
    const BasisSet basis = select_basis(corpus, 0.05);
    std::printf("basis: D=%d, bandwidth=%.4f\n\n", basis.count, basis.bandwidth);

    const auto t_cache0 = Clock::now();
    const CorpusCache cache(corpus, basis);
    const double t_cache = std::chrono::duration<double>(Clock::now() - t_cache0).count();

    Rng rng(7);
    const InitState init = draw_init(corpus.size(), k_clusters, c_types, basis.count, rng);
    MixtureModel model;
    model.num_clusters = k_clusters;
    model.num_types = c_types;
    model.num_basis = basis.count;
    model.basis = basis;
    model.rayleigh_b = init.rayleigh_b;
    model.exp_sigma = init.exp_sigma;
    Responsibilities resp = init.resp;
    resp.recount();
    model.alpha.assign(k_clusters, 1.0 / k_clusters);
    for (int k = 0; k < k_clusters; ++k) model.alpha[k] += resp.counts[k];

    std::printf("%-22s %12s %12s %9s %12s\n", "kernel", "parallel(s)", "serial(s)", "speedup",
                "max|diff|");
    std::printf("%-22s %12.4f %12s %9s %12s\n", "pair/mass cache", t_cache, "-", "-", "-");

    Responsibilities r_par, r_ser;
    const double tp_e = time_best_of(reps, [&] { r_par = e_step(model, corpus, cache); });
    const double ts_e = time_best_of(reps, [&] { r_ser = reference::e_step(model, corpus, basis); });
    std::printf("%-22s %12.4f %12.4f %9.2f %12.3e\n", "e_step", tp_e, ts_e, ts_e / tp_e,
                max_abs_diff(r_par.weights, r_ser.weights));

    PointParams pts = prior_mean_points(model);
    std::vector<double> ll_par, ll_ser;
    const double tp_l =
        time_best_of(reps, [&] { ll_par = cluster_log_likelihood_matrix(pts, corpus, cache); });
    const double ts_l = time_best_of(
        reps, [&] { ll_ser = reference::cluster_log_likelihood_matrix(pts, corpus, basis); });
    std::printf("%-22s %12.4f %12.4f %9.2f %12.3e\n", "loglik matrix", tp_l, ts_l, ts_l / tp_l,
                max_abs_diff(ll_par, ll_ser));

    PointParams pts_par, pts_ser;
    const double tp_m = time_best_of(reps, [&] {
        pts_par = prior_mean_points(model);
        inner_m_iteration(pts_par, r_par, corpus, cache, model);
    });
    const double ts_m = time_best_of(reps, [&] {
        pts_ser = prior_mean_points(model);
        reference::inner_m_iteration(pts_ser, r_par, corpus, basis, model);
    });
    std::vector<double> flat_par = pts_par.mu, flat_ser = pts_ser.mu;
    flat_par.insert(flat_par.end(), pts_par.coeffs.begin(), pts_par.coeffs.end());
    flat_ser.insert(flat_ser.end(), pts_ser.coeffs.begin(), pts_ser.coeffs.end());
    std::printf("%-22s %12.4f %12.4f %9.2f %12.3e\n", "inner M sweep", tp_m, ts_m, ts_m / tp_m,
                max_abs_diff(flat_par, flat_ser));

    double nll_par = 0.0, nll_ser = 0.0;
    const double tp_n = time_best_of(reps, [&] { nll_par = mixture_nll(pts, r_par, corpus, cache); });
    const double ts_n =
        time_best_of(reps, [&] { nll_ser = reference::mixture_nll(pts, r_par, corpus, basis); });
    std::printf("%-22s %12.4f %12.4f %9.2f %12.3e\n", "mixture NLL", tp_n, ts_n, ts_n / tp_n,
                std::abs(nll_par - nll_ser));
    return 0;
}
