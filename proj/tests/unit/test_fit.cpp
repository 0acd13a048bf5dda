#include <doctest.h>

#include <cmath>
#include <vector>

#include "hawkesmix/cache.hpp"
#include "hawkesmix/common.hpp"
#include "hawkesmix/hawkes.hpp"
#include "hawkesmix/inference.hpp"
#include "hawkesmix/metrics.hpp"
#include "hawkesmix/reference.hpp"
#include "oracles.hpp"

using namespace hawkesmix;

namespace {

struct ComparisonProblem {
    SyntheticSuite suite;
    BasisSet basis;
    MixtureModel model;
    PointParams points;
    Responsibilities resp;
};

ComparisonProblem comparison_problem(std::uint64_t seed) {
    ComparisonProblem p;
    p.suite = make_synthetic_suite(2, 2, 4, 12, ImpactKind::Sine, seed, 0.8);
    p.basis = build_basis(p.suite.corpus.max_horizon(), 2.0);
    p.model.num_clusters = 3;
    p.model.num_types = 2;
    p.model.num_basis = p.basis.count;
    p.model.basis = p.basis;
    Rng rng(seed ^ 0xabcdULL);
    p.model.alpha = {0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform()};
    for (int i = 0; i < 3 * 2; ++i) p.model.rayleigh_b.push_back(0.1 + rng.uniform());
    for (int i = 0; i < 3 * 2 * 2 * p.basis.count; ++i)
        p.model.exp_sigma.push_back(0.01 + 0.06 * rng.uniform());
    p.points = prior_mean_points(p.model);
    for (double& a : p.points.coeffs) a *= rng.uniform();
    p.resp.num_sequences = p.suite.corpus.size();
    p.resp.num_clusters = 3;
    for (std::size_t n = 0; n < p.resp.num_sequences; ++n) {
        double row[3], sum = 0.0;
        for (double& v : row) sum += (v = rng.uniform_pos());
        for (double v : row) p.resp.weights.push_back(v / sum);
    }
    p.resp.recount();
    return p;
}

double relative_gap(double a, double b) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("fitting recovers planted clusters on a small two-group corpus") {
    // Three event types give the planted kernels enough room to differ; with
    // only two types the random cluster draw is frequently unseparable.
    const SyntheticSuite suite =
        make_synthetic_suite(2, 3, 20, 40, ImpactKind::Sine, 31415, 0.8);
    FitConfig cfg;
    cfg.k_init = 6;
    cfg.outer_iters = 20;
    cfg.inner_budget = 40;
    cfg.strategy.kind = Strategy::Kind::OpenLoop;
    cfg.seed = 7;
    const FitReport rep = fit(suite.corpus, cfg);
    REQUIRE(rep.labels.size() == suite.labels.size());
    const double p = purity(Partition{rep.labels}, Partition{suite.labels});
    CHECK(p >= 0.9);
    CHECK(rep.model.num_clusters >= 1);
    CHECK(rep.model.num_clusters <= 6);
    // The trace loss must improve substantially over the random start.
    CHECK(rep.trace.back().nll < rep.trace.front().nll);
}

TEST_CASE("Monte Carlo confirms the scale-mixture moment formulas") {
    // The sequence scores are built from the mean and variance of
    // lambda = mu + sum_j a_j g_j with mu ~ Rayleigh(beta), a_j ~ Exp(1/sigma_j):
    //   E lambda = sqrt(pi/2) beta + sum sigma_j g_j
    //   V lambda = (4-pi)/2 beta^2 + sum (sigma_j g_j)^2.
    const double beta = 0.8;
    const std::vector<double> sg = {0.3, 0.45, 0.15};  // sigma_j * g_j products
    const int n = 400000;
    Rng rng(20260822);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double lam = beta * std::sqrt(-2.0 * std::log(rng.uniform_pos()));
        for (double s : sg) lam += s * (-std::log(rng.uniform_pos()));
        sum += lam;
        sumsq += lam * lam;
    }
    const double mc_mean = sum / n;
    const double mc_var = sumsq / n - mc_mean * mc_mean;
    const double mean = kSqrtHalfPi * beta + 0.3 + 0.45 + 0.15;
    const double var = kRayleighVarFactor * beta * beta + 0.09 + 0.2025 + 0.0225;
    const double mean_se = std::sqrt(var / n);
    CHECK(std::abs(mc_mean - mean) <= 5.0 * mean_se);
    CHECK(std::abs(mc_var - var) <= var * std::sqrt(8.0 / n) * 5.0);
}

TEST_CASE("the variance correction moves the log-intensity score toward truth") {
    // E log lambda is approximated by log E - V / (2 E^2). The correction must
    // beat the plain log E, and for a concentrated intensity (many comparable
    // kernel terms) the residual third-order error is provably small.
    struct Config {
        double beta;
        int terms;
        double sg;
        double band;  // admissible |MC - approx|, 0 = only require improvement
    };
    const Config configs[] = {
        {1.0, 1, 0.3, 0.0},     // Rayleigh-dominated, skewed
        {0.5, 4, 0.4, 0.0},     // mixed
        {0.2, 30, 0.25, 3e-3},  // concentrated: rel. sd ~ 0.18
    };
    Rng rng(5150);
    for (const Config& c : configs) {
        const int n = 400000;
        double sum_log = 0.0;
        for (int i = 0; i < n; ++i) {
            double lam = c.beta * std::sqrt(-2.0 * std::log(rng.uniform_pos()));
            for (int j = 0; j < c.terms; ++j) lam += c.sg * (-std::log(rng.uniform_pos()));
            sum_log += std::log(lam);
        }
        const double mc = sum_log / n;
        const double mean = kSqrtHalfPi * c.beta + c.terms * c.sg;
        const double var = kRayleighVarFactor * c.beta * c.beta + c.terms * c.sg * c.sg;
        const double approx = std::log(mean) - var / (2.0 * mean * mean);
        const double plain = std::log(mean);
        CHECK(std::abs(mc - approx) < std::abs(mc - plain));
        if (c.band > 0.0) CHECK(std::abs(mc - approx) <= c.band);
    }
}

TEST_CASE("parallel and serial soft assignments agree") {
    const ComparisonProblem p = comparison_problem(111);
    const CorpusCache cache(p.suite.corpus, p.basis);
    const Responsibilities fast = e_step(p.model, p.suite.corpus, cache);
    const Responsibilities slow = reference::e_step(p.model, p.suite.corpus, p.basis);
    REQUIRE(fast.weights.size() == slow.weights.size());
    for (std::size_t i = 0; i < fast.weights.size(); ++i)
        CHECK(relative_gap(fast.weights[i], slow.weights[i]) <= 1e-10);
    for (int k = 0; k < 3; ++k) CHECK(relative_gap(fast.counts[k], slow.counts[k]) <= 1e-10);
}

TEST_CASE("parallel and serial likelihood matrices agree") {
    const ComparisonProblem p = comparison_problem(222);
    const CorpusCache cache(p.suite.corpus, p.basis);
    const auto fast = cluster_log_likelihood_matrix(p.points, p.suite.corpus, cache);
    const auto slow = reference::cluster_log_likelihood_matrix(p.points, p.suite.corpus, p.basis);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) CHECK(relative_gap(fast[i], slow[i]) <= 1e-10);

    const double nf = mixture_nll(p.points, p.resp, p.suite.corpus, cache);
    const double ns = reference::mixture_nll(p.points, p.resp, p.suite.corpus, p.basis);
    CHECK(relative_gap(nf, ns) <= 1e-11);
}

TEST_CASE("parallel and serial inner sweeps agree") {
    const ComparisonProblem p = comparison_problem(333);
    const CorpusCache cache(p.suite.corpus, p.basis);
    PointParams fast = p.points;
    PointParams slow = p.points;
    for (int sweep = 0; sweep < 3; ++sweep) {
        inner_m_iteration(fast, p.resp, p.suite.corpus, cache, p.model);
        reference::inner_m_iteration(slow, p.resp, p.suite.corpus, p.basis, p.model);
    }
    REQUIRE(fast.mu.size() == slow.mu.size());
    for (std::size_t i = 0; i < fast.mu.size(); ++i)
        CHECK(relative_gap(fast.mu[i], slow.mu[i]) <= 1e-9);
    REQUIRE(fast.coeffs.size() == slow.coeffs.size());
    for (std::size_t i = 0; i < fast.coeffs.size(); ++i)
        CHECK(relative_gap(fast.coeffs[i], slow.coeffs[i]) <= 1e-9);
}
