#pragma once

#include <vector>

#include "hawkesmix/basis.hpp"
#include "hawkesmix/event_data.hpp"
#include "hawkesmix/model.hpp"

// Naive serial implementations of the inference kernels. They evaluate the
// basis directly per event pair instead of reading precomputed caches and
// accumulate in plain loop order, so they share no code path with the
// OpenMP kernels beyond the basis itself. Tests compare the two within
// floating-point tolerance; the benchmark tool compares their speed.
namespace hawkesmix::reference {

Responsibilities e_step(const MixtureModel& model, const Corpus& corpus, const BasisSet& basis);

std::vector<double> cluster_log_likelihood_matrix(const PointParams& points, const Corpus& corpus,
                                                  const BasisSet& basis);

double mixture_nll(const PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                   const BasisSet& basis);

void inner_m_iteration(PointParams& points, const Responsibilities& resp, const Corpus& corpus,
                       const BasisSet& basis, const MixtureModel& priors);

}  // namespace hawkesmix::reference
