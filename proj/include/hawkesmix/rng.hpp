#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace hawkesmix {

// Deterministic random source. mt19937_64 output is fixed by the standard;
// the variate transforms below are written out by hand because the standard
// library distributions are implementation-defined and would break the
// bit-reproducibility contract across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Uniform integer in [0, n). The truncation bias of ~n/2^53 is far below
    // anything observable here and keeps the draw a single uniform.
    std::uint32_t below(std::uint32_t n) {
        auto v = static_cast<std::uint32_t>(uniform() * n);
        return v < n ? v : n - 1;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable stream derivation: hash the master seed with a path of indices so
// per-sequence / per-cell streams are independent of execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t p : path) h = splitmix64(h ^ (p + 0x632be59bd9b4e019ULL));
    return h;
}

}  // namespace hawkesmix
