#pragma once

#include <cstddef>
#include <vector>

#include "hawkesmix/basis.hpp"
#include "hawkesmix/event_data.hpp"

namespace hawkesmix {

// Per-sequence basis evaluations reused across every E-step, inner M-step
// sweep, and likelihood pass. For sequence events i with predecessors j < i:
//   pair_g: g_d(t_i - t_j), laid out pair-row by event (D values per (i,j))
//   end_mass: G_d(T - t_i), D values per event
//   type_mass: per source type cp, sum over {i: c_i = cp} of end_mass rows
struct SequenceCache {
    int num_events = 0;
    std::vector<double> pair_g;     // D * i*(i-1)/2 ... rows in (i, j<i) order
    std::vector<double> end_mass;   // num_events * D
    std::vector<double> type_mass;  // C * D

    // Start of the g block for (event i, predecessor j), stride D per j.
    std::size_t pair_offset(std::size_t i, std::size_t d_count) const {
        return d_count * (i * (i - 1) / 2);
    }
};

struct CorpusCache {
    int num_types = 0;
    int num_basis = 0;
    std::vector<SequenceCache> seq;

    CorpusCache(const Corpus& corpus, const BasisSet& basis);
};

}  // namespace hawkesmix
