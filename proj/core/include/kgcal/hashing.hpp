#pragma once

#include <cstdint>
#include <string_view>

#include "kgcal/types.hpp"

namespace kgcal {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Maps the top 53 bits of a 64-bit word to [0, 1).
constexpr double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Seeded 64-bit hash of a triple. Used as the randomness source of the
// synthetic scorer, so every score is a pure function of (seed, triple).
// Split into a (head, relation) prefix and a per-tail finish so row scans
// mix only the tail.
constexpr std::uint64_t triple_hash_prefix(std::uint64_t seed, EntityId head, RelationId relation) noexcept {
    std::uint64_t x = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    x = splitmix64(x ^ head.index);
    return splitmix64(x ^ (std::uint64_t{relation.index} << 1));
}

constexpr std::uint64_t triple_hash_finish(std::uint64_t prefix, EntityId tail) noexcept {
    return splitmix64(prefix ^ (std::uint64_t{tail.index} << 2));
}

constexpr std::uint64_t triple_hash(std::uint64_t seed, const Triple& t) noexcept {
    return triple_hash_finish(triple_hash_prefix(seed, t.head, t.relation), t.tail);
}

// Named sub-seed derived from a master seed (FNV-1a over the name, then mixed).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

// Tie-break hash for retrieval facts: MD5 of the 12-byte little-endian
// encoding (head, relation, tail), first 8 digest bytes read big-endian and
// normalized to [0, 1). Stable across runs and platforms.
double tiebreak_hash(const Triple& t);

}  // namespace kgcal
