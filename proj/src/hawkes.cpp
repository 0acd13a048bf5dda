#include "hawkesmix/hawkes.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "hawkesmix/common.hpp"

namespace hawkesmix {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kHorizonMargin = 1e-6;
}  // namespace

void validate_params(const HawkesParams& params) {
    const std::size_t c = params.num_types;
    const std::size_t d = params.num_basis;
    if (params.num_types < 1) throw invalid_input("HawkesParams: need at least one type");
    if (params.num_basis < 1) throw invalid_input("HawkesParams: need at least one basis function");
    if (params.mu.size() != c || params.coeffs.size() != c * c * d)
        throw invalid_input("HawkesParams: dimension mismatch");
    for (double m : params.mu)
        if (!(m > 0.0) || !std::isfinite(m)) throw invalid_input("HawkesParams: mu must be strictly positive");
    for (double a : params.coeffs)
        if (a < 0.0 || !std::isfinite(a)) throw invalid_input("HawkesParams: coefficients must be nonnegative");
}

double intensity(const HawkesParams& params, const BasisSet& basis, const EventSequence& seq,
                 double t, int type) {
    double lam = params.mu[type];
    for (const Event& e : seq.events) {
        if (!(e.time < t)) break;
        for (int d = 0; d < basis.count; ++d) {
            const double a = params.a(type, e.type, d);
            if (a == 0.0) continue;
            lam += a * basis.value(d, t - e.time);
        }
    }
    return lam;
}

double log_likelihood(const HawkesParams& params, const BasisSet& basis, const EventSequence& seq) {
    const int c_count = params.num_types;
    const int d_count = basis.count;
    double ll = 0.0;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const int ci = seq.events[i].type;
        double lam = params.mu[ci];
        for (std::size_t j = 0; j < i; ++j) {
            const double lag = seq.events[i].time - seq.events[j].time;
            const int cj = seq.events[j].type;
            for (int d = 0; d < d_count; ++d) {
                const double a = params.a(ci, cj, d);
                if (a == 0.0) continue;
                lam += a * basis.value(d, lag);
            }
        }
        if (!(lam > 0.0))
            throw std::runtime_error("log_likelihood: zero intensity at event " + std::to_string(i) +
                                     " of sequence '" + seq.id + "'");
        ll += std::log(lam);
    }
    double compensator = std::accumulate(params.mu.begin(), params.mu.end(), 0.0) * seq.horizon;
    for (const Event& e : seq.events) {
        for (int d = 0; d < d_count; ++d) {
            const double g_mass = basis.integral(d, seq.horizon - e.time);
            if (g_mass == 0.0) continue;
            for (int c = 0; c < c_count; ++c) compensator += params.a(c, e.type, d) * g_mass;
        }
    }
    return ll - compensator;
}

std::vector<double> infectivity(const HawkesParams& params, const BasisSet& basis) {
    const int c_count = params.num_types;
    std::vector<double> phi(static_cast<std::size_t>(c_count) * c_count, 0.0);
    for (int c = 0; c < c_count; ++c)
        for (int cp = 0; cp < c_count; ++cp) {
            double v = 0.0;
            for (int d = 0; d < basis.count; ++d) v += params.a(c, cp, d) * basis.total_mass(d);
            phi[static_cast<std::size_t>(c) * c_count + cp] = v;
        }
    return phi;
}

double spectral_radius(const std::vector<double>& m, int n) {
    if (n == 0) return 0.0;
    std::vector<double> x(n, 1.0 / n), y(n);
    double rho = 1.0;
    for (int iter = 0; iter < 500; ++iter) {
        // y = (m + I) x
        for (int i = 0; i < n; ++i) {
            double s = x[i];
            for (int j = 0; j < n; ++j) s += m[static_cast<std::size_t>(i) * n + j] * x[j];
            y[i] = s;
        }
        double norm = 0.0;
        for (double v : y) norm += std::abs(v);
        if (norm == 0.0) return 0.0;
        const double prev = rho;
        rho = norm;  // ||x||_1 == 1 before the step
        for (int i = 0; i < n; ++i) x[i] = y[i] / norm;
        if (iter > 10 && std::abs(rho - prev) <= 1e-13 * rho) break;
    }
    return rho - 1.0;
}

namespace {

// Shared thinning loop. bound_step[cp] is a global upper bound on the total
// intensity a type-cp event can ever add; total_intensity(t) must evaluate
// the exact intensity sum given the events so far.
template <typename TotalIntensity, typename PickType>
EventSequence run_thinning(double base_total, const std::vector<double>& bound_step,
                           double horizon, int target_events, Rng& rng, std::string id,
                           TotalIntensity&& total_intensity, PickType&& pick_type_at) {
    EventSequence seq;
    seq.id = std::move(id);
    const bool capped = horizon > 0.0;
    if (!(base_total > 0.0))
        throw std::runtime_error("simulate: total base intensity must be positive");
    double lambda_bar = base_total;
    double t = 0.0;
    while (true) {
        if (target_events > 0 && static_cast<int>(seq.events.size()) >= target_events) break;
        t += rng.exponential(lambda_bar);
        if (capped && t > horizon) break;
        const double total = total_intensity(seq, t);
        const double u = rng.uniform();
        if (u * lambda_bar <= total) {
            // Conditioned on acceptance, u*lambda_bar is uniform on [0, total):
            // reuse it to pick the component.
            const int c = pick_type_at(u * lambda_bar);
            seq.events.push_back({t, c});
            lambda_bar += bound_step[c];
        }
    }
    seq.horizon = capped ? horizon : (seq.events.empty() ? kHorizonMargin : seq.events.back().time + kHorizonMargin);
    return seq;
}

}  // namespace

EventSequence simulate(const HawkesParams& params, const BasisSet& basis, double horizon,
                       Rng& rng, std::string id) {
    validate_params(params);
    if (!(horizon > 0.0)) throw invalid_input("simulate: horizon must be > 0");
    const int c_count = params.num_types;
    const auto phi = infectivity(params, basis);
    const double rho = spectral_radius(phi, c_count);
    if (rho >= 1.0)
        throw invalid_input("simulate: non-stationary parameters (spectral radius " +
                            std::to_string(rho) + " >= 1)");
    std::vector<double> bound_step(c_count, 0.0);
    for (int cp = 0; cp < c_count; ++cp) {
        double s = 0.0;
        for (int c = 0; c < c_count; ++c)
            for (int d = 0; d < basis.count; ++d) s += params.a(c, cp, d);
        bound_step[cp] = s;
    }
    std::vector<double> lam(c_count);
    auto total_intensity = [&](const EventSequence& seq, double t) {
        for (int c = 0; c < c_count; ++c) lam[c] = params.mu[c];
        for (const Event& e : seq.events)
            for (int d = 0; d < basis.count; ++d) {
                const double g = basis.value(d, t - e.time);
                for (int c = 0; c < c_count; ++c) lam[c] += params.a(c, e.type, d) * g;
            }
        double s = 0.0;
        for (double v : lam) s += v;
        return s;
    };
    auto pick = [&](double v) {
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) {
            acc += lam[c];
            if (v < acc) return c;
        }
        return c_count - 1;
    };
    const double base_total = std::accumulate(params.mu.begin(), params.mu.end(), 0.0);
    return run_thinning(base_total, bound_step, horizon, 0, rng, std::move(id), total_intensity, pick);
}

double ImpactFunctionSpec::value(int c, int cp, double lag) const {
    const std::size_t idx = static_cast<std::size_t>(c) * num_types + cp;
    const double b = amplitude[idx];
    const double omega = frequency[idx];
    const double s = delay[idx];
    if (b == 0.0) return 0.0;
    const double u = lag - s;
    if (u < 0.0 || u > 2.0 * kPi / omega) return 0.0;
    const double sine = b * (1.0 - std::cos(omega * u));
    if (kind == ImpactKind::Sine) return sine;
    return 2.0 * b * std::round(sine / (2.0 * b));
}

std::vector<double> ImpactFunctionSpec::infectivity() const {
    // One full period of b(1 - cos) integrates to 2 pi b / omega; the boxcar
    // truncation (height 2b over the middle half-period pi/omega) matches it.
    std::vector<double> phi(amplitude.size());
    for (std::size_t i = 0; i < amplitude.size(); ++i)
        phi[i] = 2.0 * kPi * amplitude[i] / frequency[i];
    return phi;
}

namespace {

EventSequence simulate_impact(const ImpactFunctionSpec& spec, double horizon, int target_events,
                              Rng& rng, std::string id) {
    const int c_count = spec.num_types;
    std::vector<double> bound_step(c_count, 0.0);
    for (int cp = 0; cp < c_count; ++cp) {
        double s = 0.0;
        for (int c = 0; c < c_count; ++c)
            s += 2.0 * spec.amplitude[static_cast<std::size_t>(c) * c_count + cp];
        bound_step[cp] = s;
    }
    std::vector<double> lam(c_count);
    auto total_intensity = [&](const EventSequence& seq, double t) {
        for (int c = 0; c < c_count; ++c) lam[c] = spec.mu[c];
        for (const Event& e : seq.events)
            for (int c = 0; c < c_count; ++c) lam[c] += spec.value(c, e.type, t - e.time);
        double s = 0.0;
        for (double v : lam) s += v;
        return s;
    };
    auto pick = [&](double v) {
        double acc = 0.0;
        for (int c = 0; c < c_count; ++c) {
            acc += lam[c];
            if (v < acc) return c;
        }
        return c_count - 1;
    };
    const double base_total = std::accumulate(spec.mu.begin(), spec.mu.end(), 0.0);
    return run_thinning(base_total, bound_step, horizon, target_events, rng, std::move(id),
                        total_intensity, pick);
}

}  // namespace

EventSequence simulate(const ImpactFunctionSpec& spec, double horizon, Rng& rng, std::string id) {
    if (!(horizon > 0.0)) throw invalid_input("simulate: horizon must be > 0");
    const double rho = spectral_radius(spec.infectivity(), spec.num_types);
    if (rho >= 1.0)
        throw invalid_input("simulate: non-stationary impact spec (spectral radius " +
                            std::to_string(rho) + " >= 1)");
    return simulate_impact(spec, horizon, 0, rng, std::move(id));
}

EventSequence simulate_until(const ImpactFunctionSpec& spec, int target_events, Rng& rng,
                             std::string id) {
    if (target_events < 1) throw invalid_input("simulate_until: target_events must be >= 1");
    const double rho = spectral_radius(spec.infectivity(), spec.num_types);
    if (rho >= 1.0)
        throw invalid_input("simulate_until: non-stationary impact spec (spectral radius " +
                            std::to_string(rho) + " >= 1)");
    return simulate_impact(spec, 0.0, target_events, rng, std::move(id));
}

SyntheticSuite make_synthetic_suite(int num_clusters, int num_types, int n_per_cluster,
                                    int target_events, ImpactKind kind, std::uint64_t seed,
                                    double radius_target) {
    if (num_clusters < 1) throw invalid_input("make_synthetic_suite: need K >= 1");
    if (num_types < 1) throw invalid_input("make_synthetic_suite: need C >= 1");
    if (n_per_cluster < 1) throw invalid_input("make_synthetic_suite: need n_per_cluster >= 1");
    if (target_events < 1) throw invalid_input("make_synthetic_suite: need target_events >= 1");
    if (radius_target >= 1.0) throw invalid_input("make_synthetic_suite: radius_target must be < 1");

    SyntheticSuite suite;
    suite.kind = kind;
    suite.seed = seed;
    suite.target_events = target_events;
    suite.radius_target = radius_target;

    const std::size_t pair_count = static_cast<std::size_t>(num_types) * num_types;
    Rng master(derive_seed(seed, {0}));
    for (int k = 0; k < num_clusters; ++k) {
        ImpactFunctionSpec spec;
        spec.kind = kind;
        spec.num_types = num_types;
        bool ok = false;
        for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
            spec.mu.resize(num_types);
            spec.amplitude.resize(pair_count);
            spec.frequency.resize(pair_count);
            spec.delay.resize(pair_count);
            for (int c = 0; c < num_types; ++c) spec.mu[c] = master.uniform();
            for (std::size_t p = 0; p < pair_count; ++p) {
                spec.amplitude[p] = kPi / 5.0 + master.uniform() * kPi / 5.0;
                spec.frequency[p] = kPi / 5.0 + master.uniform() * kPi / 5.0;
                spec.delay[p] = kPi / 5.0 + master.uniform() * kPi / 5.0;
            }
            const double rho = spectral_radius(spec.infectivity(), num_types);
            if (radius_target > 0.0) {
                suite.raw_radius.push_back(rho);
                const double scale = radius_target / rho;
                for (double& b : spec.amplitude) b *= scale;
                ok = true;
            } else if (rho < 1.0) {
                suite.raw_radius.push_back(rho);
                ok = true;
            }
        }
        if (!ok)
            throw std::runtime_error(
                "make_synthetic_suite: no stationary draw for cluster " + std::to_string(k) +
                " after 50 attempts; raw [pi/5, 2pi/5] draws are non-stationary by construction, "
                "use a radius_target in (0, 1)");
        suite.clusters.push_back(std::move(spec));
    }

    suite.corpus.num_types = num_types;
    suite.corpus.types_declared = true;
    char idbuf[64];
    for (int k = 0; k < num_clusters; ++k) {
        for (int j = 0; j < n_per_cluster; ++j) {
            const std::uint64_t idx = static_cast<std::uint64_t>(k) * n_per_cluster + j;
            Rng rng(derive_seed(seed, {1, idx}));
            std::snprintf(idbuf, sizeof(idbuf), "c%d-s%04llu", k, static_cast<unsigned long long>(idx));
            suite.corpus.sequences.push_back(
                simulate_until(suite.clusters[k], target_events, rng, idbuf));
            suite.labels.push_back(k);
        }
    }
    validate_corpus(suite.corpus);
    return suite;
}

void save_suite_truth(const SyntheticSuite& suite, const std::filesystem::path& file) {
    using nlohmann::json;
    json clusters = json::array();
    for (const auto& spec : suite.clusters) {
        clusters.push_back({{"mu", spec.mu},
                            {"amplitude", spec.amplitude},
                            {"frequency", spec.frequency},
                            {"delay", spec.delay}});
    }
    json doc = {{"kind", suite.kind == ImpactKind::Sine ? "sine" : "piecewise"},
                {"seed", suite.seed},
                {"num_clusters", suite.clusters.size()},
                {"num_types", suite.clusters.empty() ? 0 : suite.clusters.front().num_types},
                {"target_events", suite.target_events},
                {"radius_target", suite.radius_target},
                {"raw_spectral_radius", suite.raw_radius},
                {"clusters", std::move(clusters)}};
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write ground-truth file: " + file.string());
    out << doc.dump(2) << '\n';
}

}  // namespace hawkesmix
