#pragma once

#include <cstdint>
#include <cmath>

namespace netrand {

// Counter-based deterministic RNG (splitmix64 over a keyed counter).
// Streams are addressed by (seed, stream, counter), so independent parts of a
// computation can draw from non-overlapping streams without sharing state.
// Identical keys give identical draws on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    // Derive an independent child stream (e.g. one per restart or per round).
    Rng split(std::uint64_t substream) const {
        return Rng(seed_, mix(stream_ ^ mix(substream + 0x9e3779b97f4a7c15ULL)));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ ^ mix(stream_ + mix(counter_++ + 0x9e3779b97f4a7c15ULL));
        return mix(z);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Unit-variance normal via Box-Muller (two counter draws per call).
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Poisson draw: inversion for small means, rounded normal for large ones.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 256.0) {
            double l = std::exp(-mean), p = 1.0;
            std::uint64_t k = 0;
            do {
                ++k;
                p *= uniform01();
            } while (p > l);
            return k - 1;
        }
        double v = mean + std::sqrt(mean) * normal();
        return v <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(v));
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

} // namespace netrand
