#pragma once

#include <cstdint>
#include <random>

namespace isofuse::simlab {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Independent generator for one (seed, study, replication, stream) cell.
/// Replication r can be regenerated without touching any other replication.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t study, std::uint64_t replication,
                                 std::uint64_t stream)
{
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ study);
    h = detail::splitmix64(h ^ replication);
    h = detail::splitmix64(h ^ stream);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

} // namespace isofuse::simlab
