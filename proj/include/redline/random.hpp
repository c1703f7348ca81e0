// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace redline
{

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept
{
    return mix_seed(mix_seed(base) ^ (stream * 0xd1b54a32d192ed03ULL + 1));
}

/// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
[[nodiscard]] inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; n > 0.
[[nodiscard]] inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
    auto const limit = ~std::uint64_t { 0 } - (~std::uint64_t { 0 } % n);
    for (;;)
    {
        auto const v = rng();
        if (v < limit)
            return v % n;
    }
}

} // namespace redline
