#pragma once

#include <cstddef>
#include <vector>

#include "hawkesmix/event_data.hpp"

namespace hawkesmix {

// Gaussian basis shared by every cluster of a fit. Basis d is
// g_d(t) = exp(-(t - t_d)^2 / (2 h^2)) with centers t_d = d * t_max / D
// (d = 0..D-1) and bandwidth h = 1/omega0, so each function's spectrum has
// decayed to e^(-1/2) at the cutoff.
struct BasisSet {
    int count = 0;                 // D
    double omega0 = 0.0;
    double bandwidth = 0.0;        // h
    double t_max = 0.0;
    std::vector<double> centers;   // D entries, equally spaced from 0

    double value(int d, double t) const;
    // G_d(t) = integral of g_d over [0, t]; 0 for t <= 0, non-decreasing.
    double integral(int d, double t) const;
    // G_d evaluated at t -> infinity.
    double total_mass(int d) const;
};

// h = (4 sigma^5 / (3 M))^(1/5) over the pooled event timestamps, where
// sigma is their population standard deviation and M the pooled count.
double silverman_bandwidth(const Corpus& corpus);

// Spectral tail mass of the pooled-timestamp density estimate above omega:
// integral over [omega, inf) of M sqrt(2 pi h^2) e^(-w^2 h^2 / 2) dw,
// evaluated in closed form as pi * M * erfc(omega h / sqrt(2)).
double spectral_tail_mass(double h, std::size_t pooled_events, double omega);

// Smallest omega0 (relative tolerance 1e-6, bracketing + bisection) whose
// tail mass is <= epsilon, clamped below by omega_min. The default floor
// pi / t_max guarantees D >= 1.
double select_cutoff(const Corpus& corpus, double epsilon, double omega_min);
double select_cutoff(const Corpus& corpus, double epsilon);

// D = ceil(t_max * omega0 / pi), snapped against one-ulp overshoot at exact
// integer products.
BasisSet build_basis(double t_max, double omega0);

// Full pipeline with epsilon specified as a fraction of the total tail mass.
BasisSet select_basis(const Corpus& corpus, double epsilon_rel);

}  // namespace hawkesmix
