// Deterministic random streams keyed by (seed, agent, timestep, purpose).

#pragma once

#include "mfnash/core.hpp"

#include <cstdint>
#include <random>

namespace mfnash {

/// SplitMix64 finalizer, used to decorrelate structured stream keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Purposes that get independent streams for the same (seed, agent, t).
enum class Stream : std::uint64_t {
    Params = 1,      ///< encoder parameter draws
    Realized = 2,    ///< realized latent noise
    Bank = 3,        ///< Monte-Carlo bank noise
    Dataset = 4,     ///< synthetic series generation
    Spawner = 5,     ///< retire-and-resample draws
    Initial = 6,     ///< initial states
};

/// Generator for one (seed, agent, t, purpose) key.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t agent, std::uint64_t t, Stream purpose) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (agent + 0x1000003ULL));
    h = splitmix64(h ^ (t + 0x2000005ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    return std::mt19937_64(h);
}

/// Matrix of independent standard normal entries.
inline Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = nd(rng);
    return out;
}

}  // namespace mfnash
