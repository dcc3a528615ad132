#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "geofuse/errors.hpp"

namespace geofuse {

// All randomness in the library flows through the helpers below so that
// results are bit-identical across standard-library implementations.
// std::shuffle and std::uniform_int_distribution are implementation-defined;
// mt19937_64 itself is fully specified, so we draw from it directly.

// FNV-1a 64-bit hash of a byte string. Stable, endian-free, good enough for
// seed derivation and content-addressed directory names (not cryptographic).
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

// splitmix64 finalizer; decorrelates related seed inputs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a stream-specific sub-seed from a root seed and a textual purpose
// ("<command>/<purpose>"), so adding new commands never perturbs the draws
// of existing ones.
inline std::uint64_t derive_seed(std::uint64_t root_seed,
                                 const std::string& command,
                                 const std::string& purpose) {
    return splitmix64(root_seed ^ fnv1a64(command + "/" + purpose));
}

// Uniform integer in [0, bound) by rejection, avoiding modulo bias and the
// implementation-defined std::uniform_int_distribution.
inline std::uint64_t bounded_uint(std::mt19937_64& gen, std::uint64_t bound) {
    if (bound == 0) throw numeric_error("bounded_uint: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Standard normal via the Box-Muller transform (spare discarded so the
// draw count per call is deterministic). std::normal_distribution is
// implementation-defined and therefore avoided.
inline double standard_normal(std::mt19937_64& gen) {
    double u;
    do {
        u = uniform01(gen);
    } while (u <= 0.0);
    const double v = uniform01(gen);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u)) * std::cos(two_pi * v);
}

// Seeded Fisher-Yates permutation of {0..n-1}.
inline std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 gen(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded_uint(gen, i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace geofuse
