#pragma once

#include <cstdint>
#include <random>

namespace cvarsmd {

using Engine = std::mt19937_64;

/// Substream families. Each family owns an independent index space under one
/// master seed, so e.g. frontier points never share draws with the risk-free run.
enum class Stream : std::uint64_t {
    Iteration = 1,
    Simulate = 2,
    FrontierPoint = 3,
    RiskFree = 4,
    Replication = 5,
    Bootstrap = 6,
    Method = 7,
};

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace detail

/// Pure function of (master, stream, index).
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) noexcept {
    std::uint64_t s = detail::splitmix64(master);
    s = detail::splitmix64(s ^ static_cast<std::uint64_t>(stream));
    return detail::splitmix64(s ^ detail::splitmix64(index));
}

inline Engine make_engine(std::uint64_t master, Stream stream, std::uint64_t index) {
    return Engine(derive_seed(master, stream, index));
}

} // namespace cvarsmd
