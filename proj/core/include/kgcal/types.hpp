#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <vector>

namespace kgcal {

// Dense entity index in [0, entity_count).
struct EntityId {
    std::uint32_t index = 0;
    auto operator<=>(const EntityId&) const = default;
};

// Dense relation index in [0, relation_count).
struct RelationId {
    std::uint32_t index = 0;
    auto operator<=>(const RelationId&) const = default;
};

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;
    auto operator<=>(const Triple&) const = default;
};

// Sorted, duplicate-free list of entities. Every set-valued result in the
// library uses this representation.
using EntitySet = std::vector<EntityId>;

}  // namespace kgcal

template <>
struct std::hash<kgcal::Triple> {
    std::size_t operator()(const kgcal::Triple& t) const noexcept {
        std::uint64_t x = (std::uint64_t{t.head.index} << 32) ^
                          (std::uint64_t{t.relation.index} << 20) ^ t.tail.index;
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        return static_cast<std::size_t>(x);
    }
};
