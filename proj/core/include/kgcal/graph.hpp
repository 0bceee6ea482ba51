#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kgcal/types.hpp"

namespace kgcal {

enum class View { Complete, Observed };

// Complete ground-truth edge set plus an observed subset (the incompleteness
// mask). Triples are stored in canonical (head, relation, tail) order, so edge
// dropping and serialization never depend on input order.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Deduplicates and sorts `triples`; every observed flag starts true.
    static KnowledgeGraph from_triples(std::uint32_t entity_count, std::uint32_t relation_count,
                                       std::vector<Triple> triples);

    std::uint32_t entity_count() const noexcept { return entity_count_; }
    std::uint32_t relation_count() const noexcept { return relation_count_; }
    std::size_t triple_count() const noexcept { return triples_.size(); }
    std::size_t observed_count() const noexcept { return observed_count_; }

    std::span<const Triple> triples() const noexcept { return triples_; }
    bool is_observed(std::size_t triple_index) const noexcept { return observed_[triple_index] != 0; }
    std::span<const std::uint8_t> observed_mask() const noexcept { return observed_; }

    bool contains(const Triple& t, View view) const;
    bool valid(EntityId e) const noexcept { return e.index < entity_count_; }
    bool valid(RelationId r) const noexcept { return r.index < relation_count_; }

    // Sorted tails of (head, relation) in the requested view.
    std::span<const EntityId> tails(EntityId head, RelationId relation, View view) const;
    // Sorted heads of (tail, relation) in the requested view.
    std::span<const EntityId> heads(EntityId tail, RelationId relation, View view) const;

    // Resets the mask, then marks exactly round(fraction * |E|) triples
    // unobserved, chosen uniformly without replacement under `seed`.
    void drop_edges(double fraction, std::uint64_t seed);

    // Optional external names (side dictionaries); empty for synthetic graphs.
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;

private:
    struct Csr {
        std::vector<std::uint32_t> offsets;
        std::vector<EntityId> values;
    };

    std::size_t key(EntityId e, RelationId r) const noexcept {
        return std::size_t{e.index} * relation_count_ + r.index;
    }
    Csr build_forward(bool observed_only) const;
    Csr build_inverse(bool observed_only) const;
    void rebuild_observed_indexes();
    static std::span<const EntityId> slice(const Csr& csr, std::size_t k);

    std::uint32_t entity_count_ = 0;
    std::uint32_t relation_count_ = 0;
    std::vector<Triple> triples_;
    std::vector<std::uint8_t> observed_;
    std::size_t observed_count_ = 0;
    Csr forward_complete_;
    Csr inverse_complete_;
    Csr forward_observed_;
    Csr inverse_observed_;
};

// A graph plus the edge set traversal is allowed to see.
struct GraphView {
    const KnowledgeGraph* graph = nullptr;
    View view = View::Observed;

    std::span<const EntityId> tails(EntityId head, RelationId relation) const {
        return graph->tails(head, relation, view);
    }
    bool contains(const Triple& t) const { return graph->contains(t, view); }
};

struct SyntheticGraphOptions {
    // Probability of drawing an endpoint uniformly instead of proportionally
    // to its current degree within the relation. Lower means heavier hubs.
    double uniform_mix = 0.5;
};

KnowledgeGraph generate_synthetic(std::uint32_t entity_count, std::uint32_t relation_count,
                                  std::size_t target_triples, std::uint64_t seed,
                                  const SyntheticGraphOptions& options = {});

// Tab-separated head/relation/tail lines; vocabularies follow first occurrence.
KnowledgeGraph load_triples(const std::filesystem::path& path);

void drop_edges(KnowledgeGraph& graph, double fraction, std::uint64_t seed);

// Exact traversal: { t | exists h in sources, (h, relation, t) in the view }.
EntitySet retrieve(const GraphView& view, std::span<const EntityId> sources, RelationId relation);

// Snapshot = JSON manifest + integer-id triple file next to it. Loading
// re-applies the recorded drop so the mask is reproduced exactly.
struct GraphSnapshotInfo {
    std::uint64_t generator_seed = 0;
    double drop_fraction = 0.0;
    std::uint64_t drop_seed = 0;
};

void save_snapshot(const KnowledgeGraph& graph, const std::filesystem::path& manifest,
                   const GraphSnapshotInfo& info);
KnowledgeGraph load_snapshot(const std::filesystem::path& manifest, GraphSnapshotInfo* info = nullptr);

}  // namespace kgcal
