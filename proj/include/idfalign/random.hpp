#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace idfalign {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a global seed and a tuple of
/// indices (stage, landmark, tree, ...). Order-sensitive.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
{
    std::uint64_t h = mix64(seed);
    for (std::uint64_t k : keys)
        h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags, so that different consumers at the same indices never share a stream.
enum class SeedTag : std::uint64_t {
    Candidates = 1,
    Tree = 2,
    Instances = 3,
    KMeans = 4,
    Synthetic = 5,
};

inline Rng make_rng(std::uint64_t seed, SeedTag tag, std::initializer_list<std::uint64_t> keys = {})
{
    std::uint64_t h = derive_seed(seed, {static_cast<std::uint64_t>(tag)});
    for (std::uint64_t k : keys)
        h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
    return Rng(h);
}

} // namespace idfalign
