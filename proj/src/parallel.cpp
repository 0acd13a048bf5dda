#include "hawkesmix/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <cstring>
#include <exception>
#include <vector>

namespace hawkesmix {

namespace {
int g_threads = 0;  // 0 = unset

int env_threads() {
    const char* s = std::getenv("HAWKESMIX_THREADS");
    if (!s || !*s) return 0;
    int v = std::atoi(s);
    return v > 0 ? v : 0;
}
}  // namespace

int thread_count() {
    if (g_threads > 0) return g_threads;
    if (int e = env_threads(); e > 0) return e;
    return omp_get_max_threads();
}

void set_threads(int n) { g_threads = n > 0 ? n : 0; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
    const int nt = thread_count();
    // An exception may not escape an OpenMP region; capture the first one and
    // rethrow it once the loop has drained.
    std::exception_ptr error;
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(hawkesmix_parallel_for_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

void blocked_reduce(std::size_t n_items, std::size_t acc_len, double* acc,
                    const std::function<void(std::size_t, double*)>& accumulate_item) {
    if (n_items == 0) return;
    const std::size_t n_blocks = (n_items + kReduceBlock - 1) / kReduceBlock;
    std::vector<double> partials(n_blocks * acc_len, 0.0);
    parallel_for(n_blocks, [&](std::size_t b) {
        double* buf = partials.data() + b * acc_len;
        const std::size_t lo = b * kReduceBlock;
        const std::size_t hi = std::min(n_items, lo + kReduceBlock);
        for (std::size_t i = lo; i < hi; ++i) accumulate_item(i, buf);
    });
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const double* buf = partials.data() + b * acc_len;
        for (std::size_t j = 0; j < acc_len; ++j) acc[j] += buf[j];
    }
}

}  // namespace hawkesmix
