#pragma once

// Reproducible random streams.
//
// Uniform bits come from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Normal variates use the Marsaglia polar method written out
// here (std::normal_distribution is implementation-defined), so a seed pins
// the whole wind/noise sequence on any conforming toolchain with the same
// libm.

#include <cmath>
#include <cstdint>
#include <random>

namespace indilab {

/// SplitMix64 finaliser; used to derive independent sub-seeds.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// seed(s, r) = mix64(mix64(mix64(master) ^ s) ^ r). Keyed by scenario and
/// repetition index so that appending scenarios never changes earlier seeds.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t scenario_index,
                                           std::uint64_t repetition) {
    return mix64(mix64(mix64(master) ^ scenario_index) ^ repetition);
}

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal variate (Marsaglia polar method, pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace indilab
