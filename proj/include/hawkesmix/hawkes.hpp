#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hawkesmix/basis.hpp"
#include "hawkesmix/event_data.hpp"
#include "hawkesmix/rng.hpp"

namespace hawkesmix {

// One Hawkes process in the shared basis: type-c intensity is
//   lambda_c(t) = mu_c + sum_{t_i < t} sum_d a(c, c_i, d) g_d(t - t_i).
struct HawkesParams {
    int num_types = 0;
    int num_basis = 0;
    std::vector<double> mu;      // C, strictly positive
    std::vector<double> coeffs;  // C*C*D, nonnegative; receiver-major

    double a(int c, int cp, int d) const {
        return coeffs[(static_cast<std::size_t>(c) * num_types + cp) * num_basis + d];
    }
    double& a(int c, int cp, int d) {
        return coeffs[(static_cast<std::size_t>(c) * num_types + cp) * num_basis + d];
    }
};

void validate_params(const HawkesParams& params);

double intensity(const HawkesParams& params, const BasisSet& basis, const EventSequence& seq,
                 double t, int type);

// sum_i log lambda_{c_i}(t_i) - sum_c integral of lambda_c over [0, T], with
// the compensator in closed form through G_d.
double log_likelihood(const HawkesParams& params, const BasisSet& basis, const EventSequence& seq);

// Phi[c][cp] = sum_d a(c, cp, d) * G_d(inf), row-major C x C.
std::vector<double> infectivity(const HawkesParams& params, const BasisSet& basis);

// Largest-modulus eigenvalue of a nonnegative square matrix (power iteration
// on m + I; the Perron root is real so the shift is exact).
double spectral_radius(const std::vector<double>& m, int n);

// Ogata thinning on [0, horizon]. The dominating rate adds, per accepted
// event of type cp, the global kernel bound sum_c sum_d a(c, cp, d) (each
// g_d <= 1), so it majorizes the intensity for the rest of the run.
EventSequence simulate(const HawkesParams& params, const BasisSet& basis, double horizon,
                       Rng& rng, std::string id = "sim");

// Ground-truth generator for one synthetic cluster: per ordered type pair a
// delayed pulse phi(lag) on lag in [delay, delay + 2 pi / frequency], either
//   sine:      amplitude * (1 - cos(frequency * (lag - delay)))
//   piecewise: 2 * amplitude * round(sine / (2 * amplitude))
// (a boxcar over the middle half-period). One period of support keeps the
// integrated impact finite; both kinds integrate to the same
// 2 pi amplitude / frequency, so stationarity treatment is kind-independent.
enum class ImpactKind { Sine, Piecewise };

struct ImpactFunctionSpec {
    ImpactKind kind = ImpactKind::Sine;
    int num_types = 0;
    std::vector<double> mu;         // C
    std::vector<double> amplitude;  // C*C, receiver-major (b)
    std::vector<double> frequency;  // C*C (omega)
    std::vector<double> delay;      // C*C (s)

    double value(int c, int cp, double lag) const;
    std::vector<double> infectivity() const;
};

EventSequence simulate(const ImpactFunctionSpec& spec, double horizon, Rng& rng,
                       std::string id = "sim");

// Extends the horizon until target_events have occurred, then closes it just
// past the last event.
EventSequence simulate_until(const ImpactFunctionSpec& spec, int target_events, Rng& rng,
                             std::string id = "sim");

struct SyntheticSuite {
    Corpus corpus;
    std::vector<int> labels;                   // cluster index per sequence
    std::vector<ImpactFunctionSpec> clusters;  // amplitudes already rescaled
    ImpactKind kind = ImpactKind::Sine;
    std::uint64_t seed = 0;
    int target_events = 0;
    double radius_target = 0.0;
    std::vector<double> raw_radius;            // spectral radius before rescaling

    const ImpactFunctionSpec& cluster(int k) const { return clusters[k]; }
};

// Draws cluster generators (mu uniform on [0,1]; b, omega, s uniform on
// [pi/5, 2pi/5]) and simulates n_per_cluster sequences each. The {b, omega,
// s} stream depends only on the seed, never on the kind. radius_target > 0
// rescales each cluster's amplitudes so its infectivity has that spectral
// radius; radius_target <= 0 keeps raw draws and resamples non-stationary
// clusters (bounded retries) -- raw draws are essentially always
// non-stationary, so that path exists for contract completeness.
SyntheticSuite make_synthetic_suite(int num_clusters, int num_types, int n_per_cluster,
                                    int target_events, ImpactKind kind, std::uint64_t seed,
                                    double radius_target = 0.8);

void save_suite_truth(const SyntheticSuite& suite, const std::filesystem::path& file);

}  // namespace hawkesmix
