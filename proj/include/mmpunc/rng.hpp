// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random source. All randomness in the library flows through
// this wrapper so that fixed seeds give bitwise-identical runs regardless of
// the platform's std::*_distribution implementations.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mmpunc {

// splitmix64-style mixing, used to derive independent seed streams
// (per-epoch shuffles, per-step dropout) from one base seed.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller, hand-rolled for cross-platform determinism.
    double normal(double mean, double stddev);

    // Uniform index in [0, n). n must be > 0.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    // Fisher-Yates shuffle using this engine.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mmpunc
