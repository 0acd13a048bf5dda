#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "hawkesmix/cache.hpp"
#include "hawkesmix/hawkes.hpp"
#include "hawkesmix/inference.hpp"
#include "hawkesmix/parallel.hpp"
#include "hawkesmix/rng.hpp"

using namespace hawkesmix;

namespace {

// Restores the default thread configuration even when a subcase fails.
struct ThreadGuard {
    ~ThreadGuard() { set_threads(0); }
};

std::vector<double> noisy_items(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = (rng.uniform() - 0.5) * std::pow(10.0, 6.0 * rng.uniform() - 3.0);
    return v;
}

std::vector<double> reduce_sum(const std::vector<double>& items) {
    std::vector<double> acc(2, 0.0);
    blocked_reduce(items.size(), 2, acc.data(), [&](std::size_t i, double* buf) {
        buf[0] += items[i];
        buf[1] += items[i] * items[i];
    });
    return acc;
}

}  // namespace

TEST_CASE("blocked reduction is bit-identical across thread counts") {
    ThreadGuard guard;
    const auto items = noisy_items(1237, 8086);
    set_threads(1);
    const auto base = reduce_sum(items);
    for (int threads : {2, 3, 8}) {
        set_threads(threads);
        const auto out = reduce_sum(items);
        CHECK(out[0] == base[0]);
        CHECK(out[1] == base[1]);
    }
}

TEST_CASE("parallel_for visits every index exactly once") {
    ThreadGuard guard;
    for (int threads : {1, 3}) {
        set_threads(threads);
        std::vector<std::atomic<int>> hits(501);
        for (auto& h : hits) h.store(0);
        parallel_for(501, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) CHECK(h.load() == 1);
    }
}

TEST_CASE("exceptions from worker bodies propagate to the caller") {
    ThreadGuard guard;
    set_threads(4);
    CHECK_THROWS_AS(parallel_for(100,
                                 [](std::size_t i) {
                                     if (i == 37) throw std::runtime_error("worker failure");
                                 }),
                    std::runtime_error);
    CHECK_THROWS_AS(blocked_reduce(100, 1, nullptr,
                                   [](std::size_t i, double*) {
                                       if (i == 63) throw std::runtime_error("worker failure");
                                   }),
                    std::runtime_error);
}

TEST_CASE("explicit thread settings override the environment variable") {
    ThreadGuard guard;
    setenv("HAWKESMIX_THREADS", "3", 1);
    set_threads(0);  // fall back to the environment
    CHECK(thread_count() == 3);
    set_threads(2);  // explicit setting wins
    CHECK(thread_count() == 2);
    setenv("HAWKESMIX_THREADS", "garbage", 1);
    set_threads(0);
    CHECK(thread_count() >= 1);  // unparsable values fall through to the default
    unsetenv("HAWKESMIX_THREADS");
    set_threads(0);
    CHECK(thread_count() >= 1);
}

TEST_CASE("inference kernels are bitwise thread-count invariant") {
    ThreadGuard guard;
    const SyntheticSuite suite = make_synthetic_suite(2, 2, 5, 12, ImpactKind::Sine, 999, 0.8);
    const BasisSet basis = build_basis(suite.corpus.max_horizon(), 2.0);
    const CorpusCache cache(suite.corpus, basis);
    MixtureModel model;
    model.num_clusters = 3;
    model.num_types = 2;
    model.num_basis = basis.count;
    model.basis = basis;
    model.alpha = {1.0, 0.7, 1.3};
    Rng rng(5);
    for (int i = 0; i < 6; ++i) model.rayleigh_b.push_back(0.2 + rng.uniform());
    for (int i = 0; i < 3 * 4 * basis.count; ++i)
        model.exp_sigma.push_back(0.01 + 0.05 * rng.uniform());

    set_threads(1);
    const Responsibilities resp1 = e_step(model, suite.corpus, cache);
    PointParams pts1 = prior_mean_points(model);
    inner_m_iteration(pts1, resp1, suite.corpus, cache, model);
    const double nll1 = mixture_nll(pts1, resp1, suite.corpus, cache);

    for (int threads : {2, 5}) {
        set_threads(threads);
        const Responsibilities resp = e_step(model, suite.corpus, cache);
        CHECK(resp.weights == resp1.weights);
        CHECK(resp.counts == resp1.counts);
        PointParams pts = prior_mean_points(model);
        inner_m_iteration(pts, resp, suite.corpus, cache, model);
        CHECK(pts.mu == pts1.mu);
        CHECK(pts.coeffs == pts1.coeffs);
        CHECK(mixture_nll(pts, resp, suite.corpus, cache) == nll1);
    }
}

TEST_CASE("full fits are bitwise thread-count invariant") {
    ThreadGuard guard;
    const SyntheticSuite suite = make_synthetic_suite(2, 2, 4, 10, ImpactKind::Sine, 321, 0.8);
    FitConfig cfg;
    cfg.k_init = 3;
    cfg.outer_iters = 3;
    cfg.inner_budget = 6;
    cfg.strategy.kind = Strategy::Kind::OpenLoop;
    cfg.seed = 17;
    cfg.mcmc = true;
    set_threads(1);
    const FitReport a = fit(suite.corpus, cfg);
    set_threads(4);
    const FitReport b = fit(suite.corpus, cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].nll == b.trace[i].nll);
    CHECK(a.labels == b.labels);
    CHECK(a.resp.weights == b.resp.weights);
    CHECK(a.model.rayleigh_b == b.model.rayleigh_b);
}
