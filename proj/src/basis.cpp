#include "hawkesmix/basis.hpp"

#include <cmath>
#include <numbers>

#include "hawkesmix/common.hpp"

namespace hawkesmix {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kInvSqrt2 = 0.7071067811865476;
}  // namespace

double BasisSet::value(int d, double t) const {
    const double z = (t - centers[d]) / bandwidth;
    return std::exp(-0.5 * z * z);
}

double BasisSet::integral(int d, double t) const {
    if (t <= 0.0) return 0.0;
    const double td = centers[d];
    const double denom = bandwidth * std::numbers::sqrt2;
    return bandwidth * kSqrtHalfPi * (std::erf((t - td) / denom) + std::erf(td / denom));
}

double BasisSet::total_mass(int d) const {
    const double td = centers[d];
    return bandwidth * kSqrtHalfPi * (1.0 + std::erf(td / (bandwidth * std::numbers::sqrt2)));
}

double silverman_bandwidth(const Corpus& corpus) {
    std::size_t m = 0;
    double sum = 0.0;
    for (const auto& s : corpus.sequences)
        for (const auto& e : s.events) {
            sum += e.time;
            ++m;
        }
    if (m == 0) throw invalid_input("silverman_bandwidth: empty corpus");
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (const auto& s : corpus.sequences)
        for (const auto& e : s.events) {
            const double d = e.time - mean;
            ss += d * d;
        }
    const double sigma = std::sqrt(ss / static_cast<double>(m));
    if (sigma <= 0.0) throw invalid_input("silverman_bandwidth: degenerate timestamps");
    return std::pow(4.0 * std::pow(sigma, 5) / (3.0 * static_cast<double>(m)), 0.2);
}

double spectral_tail_mass(double h, std::size_t pooled_events, double omega) {
    return kPi * static_cast<double>(pooled_events) * std::erfc(omega * h * kInvSqrt2);
}

double select_cutoff(const Corpus& corpus, double epsilon, double omega_min) {
    if (!(epsilon > 0.0)) throw invalid_input("select_cutoff: epsilon must be > 0");
    const double h = silverman_bandwidth(corpus);
    const std::size_t m = corpus.total_events();
    if (spectral_tail_mass(h, m, 0.0) <= epsilon) return std::max(0.0, omega_min);

    double lo = 0.0;
    double hi = 1.0 / h;
    while (spectral_tail_mass(h, m, hi) > epsilon) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-6 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (spectral_tail_mass(h, m, mid) <= epsilon)
            hi = mid;
        else
            lo = mid;
    }
    return std::max(hi, omega_min);
}

double select_cutoff(const Corpus& corpus, double epsilon) {
    const double t_max = corpus.max_horizon();
    if (t_max <= 0.0) throw invalid_input("select_cutoff: corpus horizon is zero");
    return select_cutoff(corpus, epsilon, kPi / t_max);
}

BasisSet build_basis(double t_max, double omega0) {
    if (!(t_max > 0.0)) throw invalid_input("build_basis: t_max must be > 0");
    if (!(omega0 > 0.0)) throw invalid_input("build_basis: omega0 must be > 0");
    // The 1e-9 snap keeps exact integer products (e.g. t_max=10, omega0=pi)
    // from ceiling up on a one-ulp rounding overshoot.
    const double x = t_max * omega0 / kPi;
    int d_count = static_cast<int>(std::ceil(x - 1e-9));
    if (d_count < 1) d_count = 1;
    BasisSet basis;
    basis.count = d_count;
    basis.omega0 = omega0;
    basis.bandwidth = 1.0 / omega0;
    basis.t_max = t_max;
    basis.centers.resize(d_count);
    for (int d = 0; d < d_count; ++d)
        basis.centers[d] = static_cast<double>(d) * t_max / static_cast<double>(d_count);
    return basis;
}

BasisSet select_basis(const Corpus& corpus, double epsilon_rel) {
    if (!(epsilon_rel > 0.0)) throw invalid_input("select_basis: epsilon_rel must be > 0");
    const double h = silverman_bandwidth(corpus);
    const double epsilon = epsilon_rel * spectral_tail_mass(h, corpus.total_events(), 0.0);
    return build_basis(corpus.max_horizon(), select_cutoff(corpus, epsilon));
}

}  // namespace hawkesmix
