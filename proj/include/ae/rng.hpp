#ifndef AE_RNG_HPP
#define AE_RNG_HPP

#include <cmath>
#include <cstdint>

#include "ae/tensor.hpp"

namespace ae {

// Counter-based generator built on SplitMix64 mixing. Every draw is a pure
// function of (seed, stream, counter), so streams can be split per site,
// per sample, or per epoch without any shared state. All floating-point
// output is computed in double and narrowed, which keeps the float and
// double builds of the library on the same stream.
struct Rng {
    uint64_t key = 0;
    uint64_t counter = 0;

    static uint64_t mix(uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    explicit Rng(uint64_t seed, uint64_t stream = 0) { key = mix(mix(seed) ^ mix(~stream)); }

    uint64_t next_u64() { return mix(key + (counter++) * 0x9E3779B97F4A7C15ULL); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; consumes exactly two uniforms
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    void fill_normal(Tensor& t, double mean = 0, double stddev = 1) {
        for (auto& v : t.data) v = static_cast<real>(mean + stddev * normal());
    }
};

}  // namespace ae

#endif
