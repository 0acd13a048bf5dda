#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace hawkesmix {

// Worker-thread count: explicit set_threads() wins, then HAWKESMIX_THREADS,
// then the OpenMP default. Thread count never changes numeric results; all
// reductions run in a fixed blocked order (see blocked_reduce).
int thread_count();
void set_threads(int n);

// Runs f(i) for i in [0, n) across the configured threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

// Deterministic parallel reduction. Items are grouped into fixed-size blocks;
// each block accumulates its items in index order into a private buffer and
// the block buffers are folded into acc serially, lowest block first. The
// floating-point result is therefore a function of kReduceBlock only, never
// of the thread count.
inline constexpr std::size_t kReduceBlock = 16;

void blocked_reduce(std::size_t n_items, std::size_t acc_len, double* acc,
                    const std::function<void(std::size_t item, double* buf)>& accumulate_item);

}  // namespace hawkesmix
