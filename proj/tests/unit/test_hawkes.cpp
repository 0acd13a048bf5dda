#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "hawkesmix/basis.hpp"
#include "hawkesmix/common.hpp"
#include "hawkesmix/hawkes.hpp"
#include "hawkesmix/rng.hpp"
#include "oracles.hpp"

using namespace hawkesmix;

namespace {

HawkesParams poisson_params(std::vector<double> mu, int num_basis) {
    HawkesParams p;
    p.num_types = static_cast<int>(mu.size());
    p.num_basis = num_basis;
    p.mu = std::move(mu);
    p.coeffs.assign(static_cast<std::size_t>(p.num_types) * p.num_types * num_basis, 0.0);
    return p;
}

// Compensator of type c at time t, straight from the definition through the
// basis integrals (contributions from events at or after t vanish).
double compensator(const HawkesParams& params, const BasisSet& basis, const EventSequence& seq,
                   double t, int c) {
    double v = params.mu[c] * t;
    for (const Event& e : seq.events)
        for (int d = 0; d < basis.count; ++d)
            v += params.a(c, e.type, d) * basis.integral(d, t - e.time);
    return v;
}

}  // namespace

TEST_CASE("intensity with zero coefficients is the base rate") {
    const BasisSet basis = build_basis(M_PI, 1.0);
    const HawkesParams p = poisson_params({0.7}, basis.count);
    EventSequence seq;
    seq.id = "s";
    seq.horizon = 3.0;
    seq.events = {{0.5, 0}, {1.0, 0}, {2.0, 0}};
    for (double t : {0.1, 0.75, 1.5, 2.9}) CHECK(intensity(p, basis, seq, t, 0) == 0.7);
}

TEST_CASE("intensity matches the frozen one-event hand value") {
    // Basis: D = 1, center 0, bandwidth 1. One event at 0.5; the probe at 1.5
    // sees g(1) = exp(-1/2), so lambda = 0.5 + 2 exp(-1/2).
    const BasisSet basis = build_basis(M_PI, 1.0);
    REQUIRE(basis.count == 1);
    REQUIRE(basis.bandwidth == 1.0);
    REQUIRE(basis.centers[0] == 0.0);
    HawkesParams p = poisson_params({0.5}, 1);
    p.a(0, 0, 0) = 2.0;
    EventSequence seq;
    seq.id = "s";
    seq.horizon = 3.0;
    seq.events = {{0.5, 0}};
    CHECK(intensity(p, basis, seq, 1.5, 0) ==
          doctest::Approx(oracles::kIntensityProbe).epsilon(1e-15));
    // Before the first event only the base rate acts.
    CHECK(intensity(p, basis, seq, 0.25, 0) == 0.5);
}

TEST_CASE("intensity is additive in (mu, coefficients)") {
    const BasisSet basis = build_basis(4.0, 2.0);
    Rng rng(11);
    HawkesParams p1 = poisson_params({0.4, 0.9}, basis.count);
    HawkesParams p2 = poisson_params({0.3, 0.2}, basis.count);
    for (auto* p : {&p1, &p2})
        for (double& a : p->coeffs) a = rng.uniform();
    HawkesParams sum = p1;
    for (std::size_t i = 0; i < sum.coeffs.size(); ++i) sum.coeffs[i] += p2.coeffs[i];
    sum.mu[0] += p2.mu[0];
    sum.mu[1] += p2.mu[1];
    EventSequence seq;
    seq.id = "s";
    seq.horizon = 4.0;
    seq.events = {{0.2, 0}, {0.9, 1}, {1.4, 1}, {2.2, 0}};
    for (double t : {0.5, 1.0, 1.7, 3.9})
        for (int c : {0, 1})
            CHECK(intensity(sum, basis, seq, t, c) ==
                  doctest::Approx(intensity(p1, basis, seq, t, c) +
                                  intensity(p2, basis, seq, t, c))
                      .epsilon(1e-12));
}

TEST_CASE("log-likelihood reduces to the Poisson formula with zero coefficients") {
    // 4 events at rate 2 on [0, 3]: 4 log 2 - 6, frozen to 17 digits.
    const BasisSet basis = build_basis(3.0, 1.0);
    const HawkesParams p = poisson_params({2.0}, basis.count);
    EventSequence seq;
    seq.id = "s";
    seq.horizon = 3.0;
    seq.events = {{0.3, 0}, {1.1, 0}, {2.0, 0}, {2.9, 0}};
    CHECK(log_likelihood(p, basis, seq) ==
          doctest::Approx(oracles::kPoisson4Events).epsilon(1e-14));
}

TEST_CASE("log-likelihood of an empty sequence is minus the total base mass") {
    const BasisSet basis = build_basis(2.0, 2.0);
    const HawkesParams p = poisson_params({1.0}, basis.count);
    EventSequence seq;
    seq.id = "s";
    seq.horizon = 2.0;
    CHECK(log_likelihood(p, basis, seq) == -2.0);
}

TEST_CASE("multitype Poisson reduction sums per-type terms") {
    const BasisSet basis = build_basis(5.0, 1.0);
    const HawkesParams p = poisson_params({0.5, 1.5}, basis.count);
    EventSequence seq;
    seq.id = "s";
    seq.horizon = 5.0;
    seq.events = {{0.5, 0}, {1.0, 1}, {2.5, 1}, {4.0, 0}};
    const double expected = 2.0 * std::log(0.5) + 2.0 * std::log(1.5) - (0.5 + 1.5) * 5.0;
    CHECK(log_likelihood(p, basis, seq) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("log-likelihood matches a dense Riemann sum of its definition") {
    // sum_i log lambda(t_i) - sum_c integral lambda_c: the integral is checked
    // by midpoint quadrature on a 200k grid.
    const BasisSet basis = build_basis(3.0, 2.0);
    Rng rng(5);
    for (int inst = 0; inst < 3; ++inst) {
        HawkesParams p = poisson_params({0.3 + rng.uniform(), 0.2 + rng.uniform()}, basis.count);
        for (double& a : p.coeffs) a = 0.5 * rng.uniform();
        EventSequence seq;
        seq.id = "s";
        seq.horizon = 3.0;
        double t = 0.0;
        while ((t += rng.exponential(3.0)) < seq.horizon)
            seq.events.push_back({t, static_cast<int>(rng.below(2))});
        double direct = 0.0;
        for (std::size_t i = 0; i < seq.events.size(); ++i) {
            EventSequence prefix = seq;
            prefix.events.resize(i);
            direct += std::log(
                intensity(p, basis, prefix, seq.events[i].time + 1e-13, seq.events[i].type) -
                0.0);
        }
        const std::size_t grid = 200000;
        for (int c = 0; c < 2; ++c) {
            double integral = 0.0;
            const double dt = seq.horizon / grid;
            for (std::size_t g = 0; g < grid; ++g)
                integral += intensity(p, basis, seq, (g + 0.5) * dt, c) * dt;
            direct -= integral;
        }
        CHECK(log_likelihood(p, basis, seq) ==
              doctest::Approx(direct).epsilon(5e-4));
    }
}

TEST_CASE("infectivity integrates the kernels") {
    // Center at 0 keeps only the right half of the Gaussian: mass
    // h sqrt(pi/2). A center many bandwidths inside keeps both halves:
    // h sqrt(2 pi).
    const BasisSet narrow = build_basis(M_PI, 1.0);
    HawkesParams p = poisson_params({1.0}, 1);
    p.a(0, 0, 0) = 2.0;
    const auto phi = infectivity(p, narrow);
    CHECK(phi[0] == doctest::Approx(2.0 * oracles::kSqrtHalfPi).epsilon(1e-13));

    const BasisSet wide = build_basis(10.0, 2.0);
    const int d_far = wide.count - 1;
    REQUIRE(wide.centers[d_far] > 10.0 * wide.bandwidth);
    CHECK(wide.total_mass(d_far) ==
          doctest::Approx(wide.bandwidth * std::sqrt(2.0 * M_PI)).epsilon(1e-12));

    // Linearity in the coefficients.
    HawkesParams q = p;
    for (double& a : q.coeffs) a *= 3.5;
    const auto phi3 = infectivity(q, narrow);
    CHECK(phi3[0] == doctest::Approx(3.5 * phi[0]).epsilon(1e-14));
    // Zero coefficients give a zero matrix.
    const auto phi0 = infectivity(poisson_params({1.0}, 1), narrow);
    CHECK(phi0[0] == 0.0);
}

TEST_CASE("spectral radius reproduces known eigenvalues") {
    CHECK(spectral_radius({0.6}, 1) == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(spectral_radius({0.3, 0.0, 0.0, 0.9}, 2) == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(spectral_radius({0.5, 0.25, 0.25, 0.5}, 2) == doctest::Approx(0.75).epsilon(1e-10));
    // Positive matrix [[1,2],[3,4]]: Perron root (5 + sqrt(33)) / 2.
    CHECK(spectral_radius({1.0, 2.0, 3.0, 4.0}, 2) ==
          doctest::Approx(0.5 * (5.0 + std::sqrt(33.0))).epsilon(1e-10));
    CHECK(spectral_radius({0.0, 0.0, 0.0, 0.0}, 2) == doctest::Approx(0.0));
    CHECK(spectral_radius({1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0}, 3) ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("simulation is seed-deterministic") {
    const BasisSet basis = build_basis(4.0, 2.0);
    HawkesParams p = poisson_params({0.8}, basis.count);
    p.a(0, 0, 0) = 0.4;
    Rng r1(42), r2(42), r3(43);
    const EventSequence a = simulate(p, basis, 20.0, r1);
    const EventSequence b = simulate(p, basis, 20.0, r2);
    const EventSequence c = simulate(p, basis, 20.0, r3);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].type == b.events[i].type);
    }
    bool differs = a.events.size() != c.events.size();
    for (std::size_t i = 0; !differs && i < a.events.size(); ++i)
        differs = a.events[i].time != c.events[i].time;
    CHECK(differs);
}

TEST_CASE("simulation rejects bad inputs") {
    const BasisSet basis = build_basis(M_PI, 1.0);
    HawkesParams p = poisson_params({1.0}, 1);
    Rng rng(1);
    CHECK_THROWS_AS(simulate(p, basis, 0.0, rng), invalid_input);
    p.a(0, 0, 0) = 1.0 / basis.total_mass(0);  // spectral radius exactly ~1
    CHECK_THROWS_AS(simulate(p, basis, 5.0, rng), invalid_input);
}

TEST_CASE("Poisson special case has the right mean count") {
    const BasisSet basis = build_basis(M_PI, 1.0);
    const HawkesParams p = poisson_params({2.0}, 1);
    const int runs = 500;
    double total = 0.0;
    for (int r = 0; r < runs; ++r) {
        Rng rng(1000 + r);
        total += static_cast<double>(simulate(p, basis, 5.0, rng).events.size());
    }
    const double mean = total / runs;
    const double se = std::sqrt(10.0 / runs);
    CHECK(std::abs(mean - 10.0) < 3.0 * se);
}

TEST_CASE("simulated event counts approach the stationary rate") {
    // E[N] / T -> mu / (1 - phi) as T grows; finite-T burn-in only lowers it.
    const BasisSet basis = build_basis(4.0, 2.0);
    HawkesParams p = poisson_params({1.0}, basis.count);
    p.a(0, 0, 0) = 0.3;
    p.a(0, 0, 1) = 0.1;
    p.a(0, 0, 2) = 0.05;
    const double phi = infectivity(p, basis)[0];
    REQUIRE(phi < 1.0);
    const double target = 1.0 / (1.0 - phi);
    const double horizon = 200.0;
    const int runs = 15;
    double total = 0.0;
    for (int r = 0; r < runs; ++r) {
        Rng rng(7000 + r);
        total += static_cast<double>(simulate(p, basis, horizon, rng).events.size());
    }
    const double rate = total / (runs * horizon);
    CHECK(rate == doctest::Approx(target).epsilon(0.05));
}

TEST_CASE("the thinning bound dominates the realized intensity") {
    const BasisSet basis = build_basis(4.0, 2.0);
    HawkesParams p = poisson_params({0.6, 0.4}, basis.count);
    Rng coef(3);
    for (double& a : p.coeffs) a = 0.15 * coef.uniform();
    Rng rng(77);
    const EventSequence seq = simulate(p, basis, 40.0, rng);
    REQUIRE(seq.events.size() > 5);
    std::vector<double> step(2, 0.0);
    for (int cp = 0; cp < 2; ++cp)
        for (int c = 0; c < 2; ++c)
            for (int d = 0; d < basis.count; ++d) step[cp] += p.a(c, cp, d);
    Rng probe(78);
    for (int i = 0; i < 200; ++i) {
        const double t = 40.0 * probe.uniform();
        double bound = p.mu[0] + p.mu[1];
        for (const Event& e : seq.events)
            if (e.time < t) bound += step[e.type];
        const double lam = intensity(p, basis, seq, t, 0) + intensity(p, basis, seq, t, 1);
        CHECK(lam <= bound + 1e-9);
    }
}

TEST_CASE("time-rescaled increments of simulated data look exponential") {
    // Time-rescaling: compensator increments between consecutive same-type
    // events of a realized Hawkes path are iid Exp(1).
    const BasisSet basis = build_basis(4.0, 2.0);
    HawkesParams p = poisson_params({0.9}, basis.count);
    p.a(0, 0, 0) = 0.35;
    p.a(0, 0, 1) = 0.1;
    Rng rng(12345);
    const EventSequence seq = simulate(p, basis, 400.0, rng);
    REQUIRE(seq.events.size() > 300);
    std::vector<double> increments;
    double prev = 0.0;
    for (const Event& e : seq.events) {
        const double lam_int = compensator(p, basis, seq, e.time, 0);
        increments.push_back(lam_int - prev);
        prev = lam_int;
    }
    const double d =
        oracles::ks_statistic(increments, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(oracles::ks_p_value(d, increments.size()) > 0.005);
}

TEST_CASE("impact functions take the documented shapes") {
    ImpactFunctionSpec spec;
    spec.num_types = 1;
    spec.mu = {0.5};
    spec.amplitude = {0.7};
    spec.frequency = {2.0};
    spec.delay = {0.5};

    SUBCASE("sine kind") {
        spec.kind = ImpactKind::Sine;
        CHECK(spec.value(0, 0, 0.4) == 0.0);                       // before the delay
        CHECK(spec.value(0, 0, 0.5 + M_PI + 0.01) == 0.0);         // past one period
        CHECK(spec.value(0, 0, 0.5 + M_PI / 2) ==
              doctest::Approx(1.4).epsilon(1e-12));                // peak 2b at mid-period
        CHECK(spec.value(0, 0, 0.5 + M_PI / 4) ==
              doctest::Approx(0.7).epsilon(1e-12));                // b at quarter period
    }
    SUBCASE("piecewise kind is a boxcar over the middle half-period") {
        spec.kind = ImpactKind::Piecewise;
        CHECK(spec.value(0, 0, 0.5 + M_PI / 8) == 0.0);
        CHECK(spec.value(0, 0, 0.5 + M_PI / 2) == doctest::Approx(1.4));
        CHECK(spec.value(0, 0, 0.5 + M_PI - M_PI / 8) == 0.0);
    }
    SUBCASE("native infectivity matches quadrature of the kernel for both kinds") {
        for (ImpactKind kind : {ImpactKind::Sine, ImpactKind::Piecewise}) {
            spec.kind = kind;
            const double direct = oracles::integrate(
                [&](double lag) { return spec.value(0, 0, lag); }, 0.0, 0.5 + M_PI + 0.5, 1e-10);
            CHECK(spec.infectivity()[0] ==
                  doctest::Approx(2.0 * M_PI * 0.7 / 2.0)
                      .epsilon(kind == ImpactKind::Sine ? 1e-9 : 2e-4));
            CHECK(direct == doctest::Approx(2.0 * M_PI * 0.7 / 2.0)
                                .epsilon(kind == ImpactKind::Sine ? 1e-9 : 2e-4));
        }
    }
}

TEST_CASE("impact-spec simulation stops at the requested event count") {
    ImpactFunctionSpec spec;
    spec.kind = ImpactKind::Sine;
    spec.num_types = 2;
    spec.mu = {0.5, 0.5};
    spec.amplitude = {0.05, 0.05, 0.05, 0.05};
    spec.frequency = {2.0, 2.0, 2.0, 2.0};
    spec.delay = {0.3, 0.3, 0.3, 0.3};
    Rng rng(9);
    const EventSequence seq = simulate_until(spec, 25, rng);
    CHECK(seq.events.size() == 25);
    CHECK(seq.horizon == doctest::Approx(seq.events.back().time + 1e-6));
    for (const Event& e : seq.events) {
        CHECK(e.time <= seq.horizon);
        CHECK(e.type >= 0);
        CHECK(e.type < 2);
    }
    Rng rng2(9);
    const EventSequence again = simulate_until(spec, 25, rng2, "again");
    for (std::size_t i = 0; i < 25; ++i) CHECK(again.events[i].time == seq.events[i].time);
    CHECK_THROWS_AS(simulate_until(spec, 0, rng), invalid_input);
}

TEST_CASE("synthetic suites are deterministic and kind-share their draws") {
    const SyntheticSuite sine = make_synthetic_suite(2, 2, 5, 10, ImpactKind::Sine, 77, 0.8);
    CHECK(sine.corpus.size() == 10);
    CHECK(sine.labels == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    for (const auto& s : sine.corpus.sequences) CHECK(s.events.size() == 10);

    // Repeat: bitwise identical.
    const SyntheticSuite rep = make_synthetic_suite(2, 2, 5, 10, ImpactKind::Sine, 77, 0.8);
    for (std::size_t n = 0; n < 10; ++n)
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(rep.corpus.sequences[n].events[i].time == sine.corpus.sequences[n].events[i].time);
            CHECK(rep.corpus.sequences[n].events[i].type == sine.corpus.sequences[n].events[i].type);
        }

    // The {mu, amplitude, frequency, delay} stream ignores the kind.
    const SyntheticSuite pw = make_synthetic_suite(2, 2, 5, 10, ImpactKind::Piecewise, 77, 0.8);
    for (int k = 0; k < 2; ++k) {
        CHECK(pw.clusters[k].mu == sine.clusters[k].mu);
        CHECK(pw.clusters[k].amplitude == sine.clusters[k].amplitude);
        CHECK(pw.clusters[k].frequency == sine.clusters[k].frequency);
        CHECK(pw.clusters[k].delay == sine.clusters[k].delay);
    }
    CHECK(pw.raw_radius == sine.raw_radius);

    // Amplitudes were rescaled onto the requested spectral radius.
    for (int k = 0; k < 2; ++k)
        CHECK(spectral_radius(sine.clusters[k].infectivity(), 2) ==
              doctest::Approx(0.8).epsilon(1e-9));

    // Raw draws on [pi/5, 2pi/5] are non-stationary by construction, so the
    // no-rescale path reports that instead of looping forever.
    CHECK_THROWS_AS(make_synthetic_suite(1, 1, 1, 5, ImpactKind::Sine, 3, 0.0),
                    std::runtime_error);
}
