#include "hawkesmix/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "hawkesmix/common.hpp"

namespace hawkesmix {

Partition::Partition(std::vector<int> l) : labels(std::move(l)) {
    for (int v : labels)
        if (v < 0) throw invalid_input("Partition: labels must be non-negative");
}

int Partition::num_clusters() const {
    std::unordered_set<int> distinct(labels.begin(), labels.end());
    return static_cast<int>(distinct.size());
}

namespace {

// Contingency table between two labelings, with labels compacted to dense
// indices. Returns row-major counts[pred][truth].
struct Contingency {
    std::size_t rows = 0, cols = 0;
    std::vector<std::size_t> counts;
    std::unordered_map<int, std::size_t> row_of, col_of;
};

Contingency contingency_table(const Partition& predicted, const Partition& truth) {
    if (predicted.size() != truth.size())
        throw invalid_input("metrics: partitions have different lengths (" +
                            std::to_string(predicted.size()) + " vs " +
                            std::to_string(truth.size()) + ")");
    Contingency t;
    for (int v : predicted.labels)
        if (t.row_of.emplace(v, t.row_of.size()).second) ++t.rows;
    for (int v : truth.labels)
        if (t.col_of.emplace(v, t.col_of.size()).second) ++t.cols;
    t.counts.assign(t.rows * t.cols, 0);
    for (std::size_t n = 0; n < predicted.size(); ++n)
        ++t.counts[t.row_of.at(predicted.labels[n]) * t.cols + t.col_of.at(truth.labels[n])];
    return t;
}

}  // namespace

double purity(const Partition& predicted, const Partition& truth) {
    const Contingency t = contingency_table(predicted, truth);
    if (predicted.size() == 0) throw invalid_input("purity: empty partitions");
    std::size_t hit = 0;
    for (std::size_t r = 0; r < t.rows; ++r)
        hit += *std::max_element(t.counts.begin() + r * t.cols, t.counts.begin() + (r + 1) * t.cols);
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

double consistency(const std::vector<Partition>& trials) {
    const std::size_t j_count = trials.size();
    if (j_count < 2) throw invalid_input("consistency: need at least 2 trial partitions");
    const std::size_t n = trials.front().size();
    for (const Partition& p : trials)
        if (p.size() != n)
            throw invalid_input("consistency: trial partitions cover different index sets");

    double worst = 1.0;
    for (std::size_t j = 0; j < j_count; ++j) {
        const std::vector<int>& base = trials[j].labels;
        std::size_t pair_count = 0;
        std::size_t preserved = 0;  // summed over the other J-1 trials
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                if (base[a] != base[b]) continue;
                ++pair_count;
                for (std::size_t jp = 0; jp < j_count; ++jp) {
                    if (jp == j) continue;
                    if (trials[jp].labels[a] == trials[jp].labels[b]) ++preserved;
                }
            }
        const double score =
            pair_count == 0
                ? 1.0
                : static_cast<double>(preserved) /
                      (static_cast<double>(j_count - 1) * static_cast<double>(pair_count));
        worst = std::min(worst, score);
    }
    return worst;
}

std::vector<int> hungarian_assignment(const std::vector<double>& cost, std::size_t rows,
                                      std::size_t cols) {
    if (cost.size() != rows * cols) throw invalid_input("hungarian: cost size mismatch");
    if (rows > cols) throw invalid_input("hungarian: more rows than columns; pad the matrix");
    const std::size_t n = rows, m = cols;
    const double inf = std::numeric_limits<double>::infinity();
    // Potential-based shortest augmenting path; 1-indexed internals with
    // column 0 as the virtual source.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> match(m + 1, 0);  // match[col] = row occupying it
    std::vector<std::size_t> way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(rows, -1);
    for (std::size_t j = 1; j <= m; ++j)
        if (match[j] != 0) row_to_col[match[j] - 1] = static_cast<int>(j - 1);
    return row_to_col;
}

double f1_minor(const Partition& predicted, const Partition& truth, int minor_class) {
    const Contingency t = contingency_table(predicted, truth);
    const auto minor_it = t.col_of.find(minor_class);
    if (minor_it == t.col_of.end())
        throw invalid_input("f1_minor: class " + std::to_string(minor_class) +
                            " absent from the truth partition");
    const std::size_t minor_col = minor_it->second;

    // Maximize total overlap: pad the negated contingency table to a square
    // so every predicted cluster and truth class can appear in the matching.
    const std::size_t side = std::max(t.rows, t.cols);
    std::vector<double> cost(side * side, 0.0);
    for (std::size_t r = 0; r < t.rows; ++r)
        for (std::size_t c = 0; c < t.cols; ++c)
            cost[r * side + c] = -static_cast<double>(t.counts[r * t.cols + c]);
    const std::vector<int> row_to_col = hungarian_assignment(cost, side, side);

    std::size_t matched_row = side;  // sentinel: no real cluster matched
    for (std::size_t r = 0; r < t.rows; ++r)
        if (row_to_col[r] == static_cast<int>(minor_col)) matched_row = r;
    if (matched_row == side) return 0.0;  // minor class claimed by a dummy row

    std::size_t overlap = t.counts[matched_row * t.cols + minor_col];
    std::size_t cluster_size = 0, class_size = 0;
    for (std::size_t c = 0; c < t.cols; ++c) cluster_size += t.counts[matched_row * t.cols + c];
    for (std::size_t r = 0; r < t.rows; ++r) class_size += t.counts[r * t.cols + minor_col];
    if (overlap == 0 || cluster_size == 0 || class_size == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(cluster_size);
    const double recall = static_cast<double>(overlap) / static_cast<double>(class_size);
    return 2.0 * precision * recall / (precision + recall);
}

std::map<int, std::size_t> k_histogram(const std::vector<int>& final_cluster_counts) {
    if (final_cluster_counts.empty()) throw invalid_input("k_histogram: empty report list");
    std::map<int, std::size_t> hist;
    for (int k : final_cluster_counts) ++hist[k];
    return hist;
}

}  // namespace hawkesmix
