#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace alf {

using Rng = std::mt19937_64;

/// One splitmix64 step; used to decorrelate derived seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a key path.
///
/// Every random decision in a run draws from a stream keyed by what it is for
/// (generation, genome id, purpose), never from a shared generator. Results are
/// therefore independent of thread scheduling, and a checkpoint only has to
/// record the counters that make up the keys.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) noexcept
{
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t k : keys)
        s = splitmix64(s ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys)
{
    return Rng{derive_seed(master, keys)};
}

// Stream purposes.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t reproduce = 2;
inline constexpr std::uint64_t fresh = 3;
inline constexpr std::uint64_t samples = 4;
inline constexpr std::uint64_t episode = 5;
}  // namespace stream

}  // namespace alf
