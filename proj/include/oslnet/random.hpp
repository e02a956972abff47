#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace oslnet {

// Seeded generator with platform-independent distributions. The standard
// <random> distributions are implementation-defined, so uniform and normal
// draws are derived from the raw mt19937_64 stream here.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal();

    bool bernoulli(double p_true) { return uniform() < p_true; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent child seed; used to give each layer, round and
    // data recipe its own stream from one base seed.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace oslnet
