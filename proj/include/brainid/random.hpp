#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace brainid {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Order-sensitive seed derivation: hash(base, tag, index).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);

inline double uniform(Rng& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return lo + (hi - lo) * u(rng);
}

inline double standard_normal(Rng& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

} // namespace brainid
