#pragma once

#include <cstddef>
#include <map>
#include <vector>

namespace hawkesmix {

// A hard clustering of N sequences: labels[n] is the cluster index of
// sequence n. Labels must be non-negative but need not be contiguous.
struct Partition {
    std::vector<int> labels;

    Partition() = default;
    explicit Partition(std::vector<int> l);

    std::size_t size() const { return labels.size(); }
    // Number of distinct labels present.
    int num_clusters() const;
};

// Fraction of sequences lying in the majority true class of their predicted
// cluster: (1/N) sum_k max_j |W_k intersect C_j|. Invariant under relabeling
// either side; always >= 1/N for nonempty inputs.
double purity(const Partition& predicted, const Partition& truth);

// Worst case over trials of the average preservation rate of same-cluster
// pairs: min_j sum_{j' != j} sum_{(n,n') in M_j} 1{same cluster in j'}
// / ((J-1) |M_j|), with M_j the same-cluster pairs of trial j. A trial with
// no same-cluster pair scores 1.0 by convention. Requires J >= 2 partitions
// over one shared index set.
double consistency(const std::vector<Partition>& trials);

// F1 of the minor class after matching predicted clusters to truth classes by
// maximum total overlap (Hungarian assignment on the contingency table).
// Returns 0 when no predicted cluster ends up matched to the minor class.
double f1_minor(const Partition& predicted, const Partition& truth, int minor_class);

// Counts of final cluster numbers across trials.
std::map<int, std::size_t> k_histogram(const std::vector<int>& final_cluster_counts);

// Minimum-cost assignment of an n x m cost matrix (row-major) with n <= m
// (throws otherwise; pad with zero-cost columns to square a wide problem).
// Returns the assigned column per row. Exposed for direct testing against
// brute force.
std::vector<int> hungarian_assignment(const std::vector<double>& cost, std::size_t rows,
                                      std::size_t cols);

}  // namespace hawkesmix
