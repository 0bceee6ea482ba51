#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kgcal/graph.hpp"
#include "kgcal/types.hpp"

namespace kgcal {

// Supported query shapes. OnePath (a single projection) is the k = 1 case
// used to cross-check joint calibration against scalar risk control.
enum class TopologyId { OneP, ThreeP, TwoU, TwoIp };

std::string_view to_string(TopologyId topology) noexcept;
TopologyId parse_topology(std::string_view name);
std::size_t projection_count(TopologyId topology) noexcept;
std::size_t anchor_count(TopologyId topology) noexcept;

enum class NodeKind { Anchor, Projection, Intersection, Union };

struct QueryNode {
    NodeKind kind = NodeKind::Anchor;
    EntityId anchor;                      // Anchor only
    RelationId relation;                  // Projection only
    std::uint32_t gate_slot = 0;          // Projection only
    std::vector<std::uint32_t> children;  // indices of earlier nodes
};

// EPFO operator DAG. Nodes are stored in topological order (children precede
// parents) and the last node is the sink. Projection nodes carry gate slots
// 0..k-1 in node order.
class QueryDag {
public:
    QueryDag() = default;

    // Validates arities, ordering, slot numbering, a single sink and
    // reachability of every node; throws ConstructionError otherwise.
    static QueryDag build(std::vector<QueryNode> nodes, std::optional<TopologyId> topology = std::nullopt);

    std::span<const QueryNode> nodes() const noexcept { return nodes_; }
    std::size_t sink() const noexcept { return nodes_.size() - 1; }
    std::size_t k() const noexcept { return k_; }
    std::optional<TopologyId> topology() const noexcept { return topology_; }
    // Node index of the projection owning each gate slot.
    std::span<const std::uint32_t> slot_nodes() const noexcept { return slot_nodes_; }

private:
    std::vector<QueryNode> nodes_;
    std::vector<std::uint32_t> slot_nodes_;
    std::size_t k_ = 0;
    std::optional<TopologyId> topology_;
};

// 1p: (h; r). 3p: (h; r1, r2, r3). 2u: (h1, h2; r1, r2). 2ip: (h1, h2; r1, r2, r3)
// where r3 follows the intersection.
QueryDag instantiate(TopologyId topology, std::span<const EntityId> anchors, std::span<const RelationId> relations);

struct GroundTruth {
    std::vector<EntitySet> per_projection;  // indexed by gate slot
    EntitySet final;
};

// Exact evaluation of every node over a view (retrieval plus set operations).
std::vector<EntitySet> evaluate_exact(const QueryDag& dag, const GraphView& view);
GroundTruth ground_truth(const QueryDag& dag, const KnowledgeGraph& graph);

struct QueryInstance {
    TopologyId topology = TopologyId::ThreeP;
    std::vector<EntityId> anchors;
    std::vector<RelationId> relations;
    QueryDag dag;
    GroundTruth truth;
};

QueryInstance make_instance(TopologyId topology, std::vector<EntityId> anchors, std::vector<RelationId> relations,
                            const KnowledgeGraph& graph);

// Seeded walks over the complete graph. Every instance has a non-empty answer
// set and every per-projection truth set of size <= frontier_cap; duplicates
// (including mirrored two-branch queries) are rejected. Fails with
// WorkloadError after 100 * count rejected attempts.
std::vector<QueryInstance> generate_workload(const KnowledgeGraph& graph, TopologyId topology, std::size_t count,
                                             std::size_t frontier_cap, std::uint64_t seed);

// JSON lines: topology, anchors, relations, per-projection truth, answers.
void write_workload(const std::filesystem::path& path, std::span<const QueryInstance> workload);
std::vector<QueryInstance> read_workload(const std::filesystem::path& path, const KnowledgeGraph& graph);

}  // namespace kgcal
