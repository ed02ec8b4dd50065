#pragma once

#include <cstdint>
#include <random>

namespace sleepeda {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Splitting rule for replicate studies: replicate r of a run seeded s uses
// seed s + r. Replicates are parallel-safe because each gets its own engine.
inline std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t replicate_index) {
    return base + replicate_index;
}

// Sub-stream seed for unit `index` nested inside a run seeded `base`.
// replicate_seed would make runs with nearby base seeds share almost all of
// their sub-streams; the finalizer scatters them so any two (base, index)
// pairs act independent. Constants are the splitmix64 finalization round.
inline std::uint64_t derive_stream(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// A fresh distribution per call: normal_distribution caches a second variate
// internally, and sharing one across engines would leak state between them.
inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

}  // namespace sleepeda
