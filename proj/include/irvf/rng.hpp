#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "irvf/tensor.hpp"

namespace irvf {

// Seeded generator with hand-rolled transforms so that streams are
// reproducible independent of the standard library's distribution
// implementations. One Rng instance per run; draw order is part of the
// reproducibility contract (see trainer).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }

    bool coin() { return (gen_() & 1u) != 0; }

    // Box-Muller, one value per call (no cached state so the stream is
    // insensitive to call-site pairing).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void fill_uniform(Tensor<T>& t, double lo, double hi) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
    }

    template <typename T>
    void fill_normal(Tensor<T>& t, double mean, double stddev) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(normal(mean, stddev));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace irvf
