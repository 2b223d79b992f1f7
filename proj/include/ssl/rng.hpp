#pragma once

// Deterministic random helpers shared by synthesis, benchmarks and tests.
// Only the engine itself comes from the standard library: the mt19937_64
// output sequence is pinned by the standard, while distribution classes are
// not, so the transforms below are spelled out by hand to keep generated
// scenes identical across toolchains.

#include <cmath>
#include <cstdint>
#include <random>

namespace ssl {

// Derives an independent stream seed from a base seed and a role tag, so
// adding one consumer never shifts another consumer's draws.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t x = base ^ (0x632be59bd9b4e019ull * (tag + 1));
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// uniform in [0, 1) with 53 random bits
inline double uniform01(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

// standard normal via Box-Muller (two draws per call, no cached state)
inline double gaussian(std::mt19937_64& g) {
    const double u1 = 1.0 - uniform01(g);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace ssl
