#include "flowalign/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "flowalign/errors.hpp"

namespace flowalign {
namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() noexcept {
    ++counter_;
    return splitmix64(seed_ + counter_ * kGoldenGamma);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw ArgError("uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return static_cast<std::size_t>(r % bound);
}

double Rng::normal() noexcept {
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double gauss(Rng& rng, double mean, double std) {
    if (!(std >= 0.0)) throw ArgError("gauss: negative standard deviation");
    if (std == 0.0) return mean;
    return mean + std * rng.normal();
}

}  // namespace flowalign
