#include "kgcal/query.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <tuple>

#include <json.hpp>

#include "kgcal/error.hpp"
#include "kgcal/rng.hpp"

namespace kgcal {

std::string_view to_string(TopologyId topology) noexcept {
    switch (topology) {
        case TopologyId::OneP: return "1p";
        case TopologyId::ThreeP: return "3p";
        case TopologyId::TwoU: return "2u";
        case TopologyId::TwoIp: return "2ip";
    }
    return "?";
}

TopologyId parse_topology(std::string_view name) {
    if (name == "1p") return TopologyId::OneP;
    if (name == "3p") return TopologyId::ThreeP;
    if (name == "2u") return TopologyId::TwoU;
    if (name == "2ip") return TopologyId::TwoIp;
    throw ConfigError("unknown topology: " + std::string(name));
}

std::size_t projection_count(TopologyId topology) noexcept {
    switch (topology) {
        case TopologyId::OneP: return 1;
        case TopologyId::ThreeP: return 3;
        case TopologyId::TwoU: return 2;
        case TopologyId::TwoIp: return 3;
    }
    return 0;
}

std::size_t anchor_count(TopologyId topology) noexcept {
    return topology == TopologyId::TwoU || topology == TopologyId::TwoIp ? 2 : 1;
}

QueryDag QueryDag::build(std::vector<QueryNode> nodes, std::optional<TopologyId> topology) {
    if (nodes.empty()) throw ConstructionError("query DAG has no nodes");
    QueryDag dag;
    std::vector<std::uint32_t> parents(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const auto arity = n.children.size();
        switch (n.kind) {
            case NodeKind::Anchor:
                if (arity != 0) throw ConstructionError("anchor nodes take no inputs");
                break;
            case NodeKind::Projection:
                if (arity != 1) throw ConstructionError("projection nodes take exactly one input");
                if (n.gate_slot != dag.slot_nodes_.size()) {
                    throw ConstructionError("gate slots must be numbered 0..k-1 in topological order");
                }
                dag.slot_nodes_.push_back(static_cast<std::uint32_t>(i));
                break;
            case NodeKind::Intersection:
            case NodeKind::Union:
                if (arity < 2) throw ConstructionError("set operators take at least two inputs");
                break;
        }
        for (const auto c : n.children) {
            if (c >= i) throw ConstructionError("children must precede their parent (acyclic, topological order)");
            ++parents[c];
        }
    }
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if (parents[i] == 0) throw ConstructionError("query DAG must have a single sink");
    }
    // Every node has a parent except the last, and children precede parents,
    // so walking parents upward always reaches the sink: reachability holds.
    dag.k_ = dag.slot_nodes_.size();
    dag.nodes_ = std::move(nodes);
    if (topology && projection_count(*topology) != dag.k_) {
        throw ConstructionError("projection count does not match topology " + std::string(to_string(*topology)));
    }
    dag.topology_ = topology;
    return dag;
}

namespace {

QueryNode anchor(EntityId e) {
    QueryNode n;
    n.kind = NodeKind::Anchor;
    n.anchor = e;
    return n;
}

QueryNode projection(std::uint32_t child, RelationId r, std::uint32_t slot) {
    QueryNode n;
    n.kind = NodeKind::Projection;
    n.relation = r;
    n.gate_slot = slot;
    n.children = {child};
    return n;
}

QueryNode combine(NodeKind kind, std::vector<std::uint32_t> children) {
    QueryNode n;
    n.kind = kind;
    n.children = std::move(children);
    return n;
}

}  // namespace

QueryDag instantiate(TopologyId topology, std::span<const EntityId> anchors, std::span<const RelationId> relations) {
    if (anchors.size() != anchor_count(topology) || relations.size() != projection_count(topology)) {
        throw ConstructionError("topology " + std::string(to_string(topology)) + " expects " +
                                std::to_string(anchor_count(topology)) + " anchor(s) and " +
                                std::to_string(projection_count(topology)) + " relation(s)");
    }
    std::vector<QueryNode> nodes;
    switch (topology) {
        case TopologyId::OneP:
            nodes = {anchor(anchors[0]), projection(0, relations[0], 0)};
            break;
        case TopologyId::ThreeP:
            nodes = {anchor(anchors[0]), projection(0, relations[0], 0), projection(1, relations[1], 1),
                     projection(2, relations[2], 2)};
            break;
        case TopologyId::TwoU:
            nodes = {anchor(anchors[0]), anchor(anchors[1]), projection(0, relations[0], 0),
                     projection(1, relations[1], 1), combine(NodeKind::Union, {2, 3})};
            break;
        case TopologyId::TwoIp:
            nodes = {anchor(anchors[0]),
                     anchor(anchors[1]),
                     projection(0, relations[0], 0),
                     projection(1, relations[1], 1),
                     combine(NodeKind::Intersection, {2, 3}),
                     projection(4, relations[2], 2)};
            break;
    }
    return QueryDag::build(std::move(nodes), topology);
}

std::vector<EntitySet> evaluate_exact(const QueryDag& dag, const GraphView& view) {
    const auto nodes = dag.nodes();
    std::vector<EntitySet> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        switch (n.kind) {
            case NodeKind::Anchor:
                out[i] = {n.anchor};
                break;
            case NodeKind::Projection:
                out[i] = retrieve(view, out[n.children[0]], n.relation);
                break;
            case NodeKind::Intersection: {
                EntitySet acc = out[n.children[0]];
                for (std::size_t c = 1; c < n.children.size(); ++c) {
                    EntitySet next;
                    const auto& rhs = out[n.children[c]];
                    std::set_intersection(acc.begin(), acc.end(), rhs.begin(), rhs.end(), std::back_inserter(next));
                    acc = std::move(next);
                }
                out[i] = std::move(acc);
                break;
            }
            case NodeKind::Union: {
                EntitySet acc;
                for (const auto c : n.children) {
                    EntitySet next;
                    std::set_union(acc.begin(), acc.end(), out[c].begin(), out[c].end(), std::back_inserter(next));
                    acc = std::move(next);
                }
                out[i] = std::move(acc);
                break;
            }
        }
    }
    return out;
}

GroundTruth ground_truth(const QueryDag& dag, const KnowledgeGraph& graph) {
    auto outputs = evaluate_exact(dag, GraphView{&graph, View::Complete});
    GroundTruth truth;
    for (const auto node : dag.slot_nodes()) truth.per_projection.push_back(outputs[node]);
    truth.final = std::move(outputs[dag.sink()]);
    return truth;
}

QueryInstance make_instance(TopologyId topology, std::vector<EntityId> anchors, std::vector<RelationId> relations,
                            const KnowledgeGraph& graph) {
    for (const auto a : anchors) {
        if (!graph.valid(a)) throw ConstructionError("anchor id outside the graph");
    }
    for (const auto r : relations) {
        if (!graph.valid(r)) throw ConstructionError("relation id outside the graph");
    }
    QueryInstance q;
    q.topology = topology;
    q.dag = instantiate(topology, anchors, relations);
    q.truth = ground_truth(q.dag, graph);
    q.anchors = std::move(anchors);
    q.relations = std::move(relations);
    return q;
}

namespace {

// Out- and in-edge lists over all relations, used only by the walk sampler.
struct WalkIndex {
    std::vector<std::uint32_t> out_offsets;  // triples are sorted by head
    std::vector<std::uint32_t> in_offsets;
    std::vector<std::uint32_t> in_edges;  // triple indices sorted by tail
    std::vector<EntityId> sources;        // entities with at least one out-edge

    explicit WalkIndex(const KnowledgeGraph& g) {
        const auto triples = g.triples();
        const auto n = g.entity_count();
        out_offsets.assign(n + 1, 0);
        in_offsets.assign(n + 1, 0);
        for (const auto& t : triples) {
            ++out_offsets[t.head.index + 1];
            ++in_offsets[t.tail.index + 1];
        }
        for (std::uint32_t i = 0; i < n; ++i) {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        in_edges.resize(triples.size());
        std::vector<std::uint32_t> cursor(in_offsets.begin(), in_offsets.end() - 1);
        for (std::uint32_t i = 0; i < triples.size(); ++i) in_edges[cursor[triples[i].tail.index]++] = i;
        for (std::uint32_t e = 0; e < n; ++e) {
            if (out_offsets[e + 1] > out_offsets[e]) sources.push_back(EntityId{e});
        }
    }

    std::uint32_t out_degree(EntityId e) const { return out_offsets[e.index + 1] - out_offsets[e.index]; }
    std::uint32_t in_degree(EntityId e) const { return in_offsets[e.index + 1] - in_offsets[e.index]; }
};

using QueryKey = std::tuple<int, std::vector<std::uint32_t>, std::vector<std::uint32_t>>;

QueryKey key_of(TopologyId topology, const std::vector<EntityId>& anchors, const std::vector<RelationId>& relations) {
    QueryKey key{static_cast<int>(topology), {}, {}};
    for (const auto a : anchors) std::get<1>(key).push_back(a.index);
    for (const auto r : relations) std::get<2>(key).push_back(r.index);
    return key;
}

}  // namespace

std::vector<QueryInstance> generate_workload(const KnowledgeGraph& graph, TopologyId topology, std::size_t count,
                                             std::size_t frontier_cap, std::uint64_t seed) {
    const std::string name(to_string(topology));
    if (count < 1) throw WorkloadError("workload for " + name + " needs count >= 1");
    if (frontier_cap < 1) throw WorkloadError("workload for " + name + " needs frontier_cap >= 1");
    if (graph.triple_count() == 0) throw WorkloadError("cannot sample " + name + " queries from an empty graph");

    const WalkIndex index(graph);
    const auto triples = graph.triples();
    Rng rng(seed);

    auto random_out_edge = [&](EntityId from) -> const Triple* {
        const auto deg = index.out_degree(from);
        if (deg == 0) return nullptr;
        return &triples[index.out_offsets[from.index] + rng.below(deg)];
    };

    std::vector<QueryInstance> workload;
    std::set<QueryKey> seen;
    const std::size_t budget = 100 * count;
    std::size_t rejected = 0;

    while (workload.size() < count) {
        if (rejected >= budget) {
            throw WorkloadError("workload generation for " + name + " stalled after " + std::to_string(rejected) +
                                " rejected attempts (" + std::to_string(workload.size()) + "/" +
                                std::to_string(count) + " instances)");
        }
        std::vector<EntityId> anchors;
        std::vector<RelationId> relations;
        bool ok = true;
        switch (topology) {
            case TopologyId::OneP:
            case TopologyId::ThreeP: {
                EntityId at = index.sources[rng.below(index.sources.size())];
                anchors.push_back(at);
                for (std::size_t hop = 0; hop < projection_count(topology) && ok; ++hop) {
                    const Triple* e = random_out_edge(at);
                    if (!e) {
                        ok = false;
                        break;
                    }
                    relations.push_back(e->relation);
                    at = e->tail;
                }
                break;
            }
            case TopologyId::TwoU: {
                for (int branch = 0; branch < 2; ++branch) {
                    const EntityId h = index.sources[rng.below(index.sources.size())];
                    anchors.push_back(h);
                    relations.push_back(random_out_edge(h)->relation);
                }
                ok = anchors[0] != anchors[1] || relations[0] != relations[1];
                break;
            }
            case TopologyId::TwoIp: {
                const Triple& first = triples[rng.below(triples.size())];
                const EntityId mid = first.tail;
                const auto in_deg = index.in_degree(mid);
                const Triple& second = triples[index.in_edges[index.in_offsets[mid.index] + rng.below(in_deg)]];
                const Triple* last = random_out_edge(mid);
                ok = last != nullptr && (first.head != second.head || first.relation != second.relation);
                if (ok) {
                    anchors = {first.head, second.head};
                    relations = {first.relation, second.relation, last->relation};
                }
                break;
            }
        }
        if (!ok) {
            ++rejected;
            continue;
        }

        auto key = key_of(topology, anchors, relations);
        std::optional<QueryKey> mirror;
        if (anchor_count(topology) == 2) {
            std::vector<EntityId> a2{anchors[1], anchors[0]};
            std::vector<RelationId> r2 = relations;
            std::swap(r2[0], r2[1]);
            mirror = key_of(topology, a2, r2);
        }
        if (seen.contains(key) || (mirror && seen.contains(*mirror))) {
            ++rejected;
            continue;
        }

        auto instance = make_instance(topology, std::move(anchors), std::move(relations), graph);
        const bool capped = std::all_of(instance.truth.per_projection.begin(), instance.truth.per_projection.end(),
                                        [&](const EntitySet& s) { return s.size() <= frontier_cap; });
        if (!capped || instance.truth.final.empty()) {
            ++rejected;
            continue;
        }
        seen.insert(std::move(key));
        workload.push_back(std::move(instance));
    }
    return workload;
}

namespace {

using ojson = nlohmann::ordered_json;

std::vector<std::uint32_t> raw(const EntitySet& s) {
    std::vector<std::uint32_t> v;
    v.reserve(s.size());
    for (const auto e : s) v.push_back(e.index);
    return v;
}

EntitySet entity_set(const ojson& j) {
    EntitySet s;
    for (const auto& v : j) s.push_back(EntityId{v.get<std::uint32_t>()});
    return s;
}

}  // namespace

void write_workload(const std::filesystem::path& path, std::span<const QueryInstance> workload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write workload: " + path.string());
    for (const auto& q : workload) {
        ojson line;
        line["topology"] = to_string(q.topology);
        line["anchors"] = ojson::array();
        for (const auto a : q.anchors) line["anchors"].push_back(a.index);
        line["relations"] = ojson::array();
        for (const auto r : q.relations) line["relations"].push_back(r.index);
        line["per_projection"] = ojson::array();
        for (const auto& s : q.truth.per_projection) line["per_projection"].push_back(raw(s));
        line["answers"] = raw(q.truth.final);
        out << line.dump() << '\n';
    }
}

std::vector<QueryInstance> read_workload(const std::filesystem::path& path, const KnowledgeGraph& graph) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open workload: " + path.string());
    std::vector<QueryInstance> workload;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = ojson::parse(line);
            const auto topology = parse_topology(j.at("topology").get<std::string>());
            std::vector<EntityId> anchors;
            for (const auto& a : j.at("anchors")) anchors.push_back(EntityId{a.get<std::uint32_t>()});
            std::vector<RelationId> relations;
            for (const auto& r : j.at("relations")) relations.push_back(RelationId{r.get<std::uint32_t>()});
            auto q = make_instance(topology, std::move(anchors), std::move(relations), graph);
            GroundTruth stored;
            for (const auto& s : j.at("per_projection")) stored.per_projection.push_back(entity_set(s));
            stored.final = entity_set(j.at("answers"));
            if (stored.per_projection != q.truth.per_projection || stored.final != q.truth.final) {
                throw WorkloadError("stored ground truth does not match the graph");
            }
            workload.push_back(std::move(q));
        } catch (const ojson::exception& e) {
            throw ParseError(std::string("malformed workload line: ") + e.what(), line_no);
        } catch (const Error& e) {
            throw ParseError(std::string("invalid workload line: ") + e.what(), line_no);
        }
    }
    return workload;
}

}  // namespace kgcal
