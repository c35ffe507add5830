#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace msr {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of stream `index` under a master seed. Distinct (seed, index) pairs
// map to decorrelated generator states.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Engine make_stream(std::uint64_t seed, std::uint64_t index) {
    return Engine(stream_seed(seed, index));
}

// Uniform on [0,1) with 53 random bits; independent of the standard library's
// distribution implementations so runs replay bit-identically everywhere.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double exponential(Engine& eng, double rate) {
    return -std::log1p(-uniform01(eng)) / rate;
}

}  // namespace msr
