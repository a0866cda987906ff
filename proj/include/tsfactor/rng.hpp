#pragma once

#include <cmath>
#include <cstdint>

namespace tsf::rng {

// Counter-based generator: every value is a pure function of (seed, stream,
// counter), so draws are reproducible regardless of partitioning or thread
// interleaving. Streams keep unrelated consumers (sketch matrix, column
// sampling, straggler injection, ...) from sharing a sequence.

enum Stream : std::uint64_t {
    kGaussianSketch = 1,
    kColumnSampling = 2,
    kStragglerInjection = 3,
    kSyntheticData = 4,
    kEigsStart = 5,
};

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return mix64(mix64(seed ^ stream * 0xc2b2ae3d27d4eb4full) + counter);
}

/// Uniform double in [0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(bits(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; one value per counter.
inline double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    // Two uniforms per pair of counters; u1 is kept away from 0 for the log.
    const std::uint64_t pair = counter >> 1;
    const double u1 =
        (static_cast<double>(bits(seed, stream, 2 * pair) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform(seed, stream, 2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    return (counter & 1) ? r * std::sin(angle) : r * std::cos(angle);
}

}  // namespace tsf::rng
