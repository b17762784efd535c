#pragma once

#include <cstddef>
#include <cstdint>

namespace flowalign {

/// Counter-based generator: output n is splitmix64(seed + n * golden_gamma).
///
/// Every draw is a pure function of (seed, counter), so a stream is
/// reproducible on any platform given the seed and the call sequence.
/// Gaussian draws use the Box-Muller transform and consume two words.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);

    /// Standard normal draw.
    double normal() noexcept;

    /// Derive an independent child stream, e.g. one per training component.
    Rng split() noexcept { return Rng(next_u64()); }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Draw from N(mean, std^2). std == 0 returns mean exactly without
/// consuming randomness. Negative std throws ArgError.
double gauss(Rng& rng, double mean, double std);

}  // namespace flowalign
