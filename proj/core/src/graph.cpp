#include "kgcal/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "kgcal/error.hpp"
#include "kgcal/rng.hpp"

namespace kgcal {

using json = nlohmann::json;

KnowledgeGraph KnowledgeGraph::from_triples(std::uint32_t entity_count, std::uint32_t relation_count,
                                            std::vector<Triple> triples) {
    if (entity_count == 0 || relation_count == 0) {
        throw ConfigError("graph needs at least one entity and one relation");
    }
    for (const auto& t : triples) {
        if (t.head.index >= entity_count || t.tail.index >= entity_count ||
            t.relation.index >= relation_count) {
            throw ConfigError("triple references an id outside the graph vocabulary");
        }
    }
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());

    KnowledgeGraph g;
    g.entity_count_ = entity_count;
    g.relation_count_ = relation_count;
    g.triples_ = std::move(triples);
    g.observed_.assign(g.triples_.size(), 1);
    g.observed_count_ = g.triples_.size();
    g.forward_complete_ = g.build_forward(false);
    g.inverse_complete_ = g.build_inverse(false);
    g.rebuild_observed_indexes();
    return g;
}

KnowledgeGraph::Csr KnowledgeGraph::build_forward(bool observed_only) const {
    Csr csr;
    const std::size_t keys = std::size_t{entity_count_} * relation_count_;
    csr.offsets.assign(keys + 1, 0);
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (observed_only && !observed_[i]) continue;
        ++csr.offsets[key(triples_[i].head, triples_[i].relation) + 1];
    }
    std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
    csr.values.resize(csr.offsets.back());
    // Triples are sorted by (head, relation, tail), so a single pass keeps
    // every slice sorted by tail.
    std::vector<std::uint32_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (observed_only && !observed_[i]) continue;
        const auto& t = triples_[i];
        csr.values[cursor[key(t.head, t.relation)]++] = t.tail;
    }
    return csr;
}

KnowledgeGraph::Csr KnowledgeGraph::build_inverse(bool observed_only) const {
    Csr csr;
    const std::size_t keys = std::size_t{entity_count_} * relation_count_;
    csr.offsets.assign(keys + 1, 0);
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (observed_only && !observed_[i]) continue;
        ++csr.offsets[key(triples_[i].tail, triples_[i].relation) + 1];
    }
    std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
    csr.values.resize(csr.offsets.back());
    // Heads are visited in ascending order, so slices come out sorted.
    std::vector<std::uint32_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        if (observed_only && !observed_[i]) continue;
        const auto& t = triples_[i];
        csr.values[cursor[key(t.tail, t.relation)]++] = t.head;
    }
    return csr;
}

void KnowledgeGraph::rebuild_observed_indexes() {
    forward_observed_ = build_forward(true);
    inverse_observed_ = build_inverse(true);
}

std::span<const EntityId> KnowledgeGraph::slice(const Csr& csr, std::size_t k) {
    return std::span<const EntityId>(csr.values).subspan(csr.offsets[k], csr.offsets[k + 1] - csr.offsets[k]);
}

std::span<const EntityId> KnowledgeGraph::tails(EntityId head, RelationId relation, View view) const {
    return slice(view == View::Complete ? forward_complete_ : forward_observed_, key(head, relation));
}

std::span<const EntityId> KnowledgeGraph::heads(EntityId tail, RelationId relation, View view) const {
    return slice(view == View::Complete ? inverse_complete_ : inverse_observed_, key(tail, relation));
}

bool KnowledgeGraph::contains(const Triple& t, View view) const {
    if (!valid(t.head) || !valid(t.tail) || !valid(t.relation)) return false;
    const auto ts = tails(t.head, t.relation, view);
    return std::binary_search(ts.begin(), ts.end(), t.tail);
}

void KnowledgeGraph::drop_edges(double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0) || fraction >= 1.0) {
        throw ConfigError("drop fraction must lie in [0, 1)");
    }
    const auto n = triples_.size();
    const auto dropped = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(seed);
    rng.shuffle(std::span<std::uint32_t>(order));

    observed_.assign(n, 1);
    for (std::size_t i = 0; i < dropped; ++i) observed_[order[i]] = 0;
    observed_count_ = n - dropped;
    rebuild_observed_indexes();
}

void drop_edges(KnowledgeGraph& graph, double fraction, std::uint64_t seed) {
    graph.drop_edges(fraction, seed);
}

KnowledgeGraph generate_synthetic(std::uint32_t entity_count, std::uint32_t relation_count,
                                  std::size_t target_triples, std::uint64_t seed,
                                  const SyntheticGraphOptions& options) {
    if (entity_count < 2 || relation_count < 1 || target_triples < 1) {
        throw ConfigError("synthetic graph needs entity_count >= 2, relation_count >= 1, target_triples >= 1");
    }
    const double capacity = static_cast<double>(entity_count) * (entity_count - 1.0) * relation_count;
    if (static_cast<double>(target_triples) > capacity) {
        throw ConfigError("target_triples exceeds the number of distinct non-loop triples");
    }
    if (!(options.uniform_mix > 0.0) || options.uniform_mix > 1.0) {
        throw ConfigError("uniform_mix must lie in (0, 1]");
    }

    Rng rng(seed);
    std::vector<Triple> triples;
    triples.reserve(target_triples);
    std::unordered_set<Triple> seen;
    seen.reserve(target_triples * 2);

    for (std::uint32_t r = 0; r < relation_count; ++r) {
        const std::size_t quota = target_triples / relation_count + (r < target_triples % relation_count ? 1 : 0);
        std::vector<EntityId> head_pool;
        std::vector<EntityId> tail_pool;
        const std::size_t max_attempts = 50 * quota + 100;
        std::size_t made = 0;
        for (std::size_t attempt = 0; made < quota && attempt < max_attempts; ++attempt) {
            auto pick = [&](const std::vector<EntityId>& pool) {
                if (pool.empty() || rng.uniform() < options.uniform_mix) {
                    return EntityId{static_cast<std::uint32_t>(rng.below(entity_count))};
                }
                return pool[rng.below(pool.size())];
            };
            const EntityId h = pick(head_pool);
            const EntityId t = pick(tail_pool);
            if (h == t) continue;
            const Triple triple{h, RelationId{r}, t};
            if (!seen.insert(triple).second) continue;
            triples.push_back(triple);
            head_pool.push_back(h);
            tail_pool.push_back(t);
            ++made;
        }
    }
    return KnowledgeGraph::from_triples(entity_count, relation_count, std::move(triples));
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::uint32_t intern(std::unordered_map<std::string, std::uint32_t>& ids, std::vector<std::string>& names,
                     std::string_view token) {
    auto [it, inserted] = ids.try_emplace(std::string(token), static_cast<std::uint32_t>(names.size()));
    if (inserted) names.emplace_back(token);
    return it->second;
}

}  // namespace

KnowledgeGraph load_triples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open triple file: " + path.string());

    std::unordered_map<std::string, std::uint32_t> entity_ids;
    std::unordered_map<std::string, std::uint32_t> relation_ids;
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;
    std::vector<Triple> triples;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        const auto fields = split_tabs(view);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw ParseError("malformed triple line in " + path.string(), line_no);
        }
        const auto h = intern(entity_ids, entity_names, fields[0]);
        const auto r = intern(relation_ids, relation_names, fields[1]);
        const auto t = intern(entity_ids, entity_names, fields[2]);
        triples.push_back({EntityId{h}, RelationId{r}, EntityId{t}});
    }
    if (triples.empty()) throw ConfigError("triple file is empty: " + path.string());

    auto graph = KnowledgeGraph::from_triples(static_cast<std::uint32_t>(entity_names.size()),
                                              static_cast<std::uint32_t>(relation_names.size()),
                                              std::move(triples));
    graph.entity_names = std::move(entity_names);
    graph.relation_names = std::move(relation_names);
    return graph;
}

EntitySet retrieve(const GraphView& view, std::span<const EntityId> sources, RelationId relation) {
    EntitySet out;
    for (const auto h : sources) {
        const auto ts = view.tails(h, relation);
        out.insert(out.end(), ts.begin(), ts.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void save_snapshot(const KnowledgeGraph& graph, const std::filesystem::path& manifest,
                   const GraphSnapshotInfo& info) {
    auto triples_path = manifest;
    triples_path.replace_extension(".tsv");
    {
        std::ofstream out(triples_path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + triples_path.string());
        for (const auto& t : graph.triples()) {
            out << t.head.index << '\t' << t.relation.index << '\t' << t.tail.index << '\n';
        }
    }
    json doc = {
        {"format", "kgcal-graph"},
        {"version", 1},
        {"entity_count", graph.entity_count()},
        {"relation_count", graph.relation_count()},
        {"triple_count", graph.triple_count()},
        {"triples_file", triples_path.filename().string()},
        {"generator_seed", info.generator_seed},
        {"drop_fraction", info.drop_fraction},
        {"drop_seed", info.drop_seed},
    };
    std::ofstream out(manifest, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + manifest.string());
    out << doc.dump(2) << '\n';
}

KnowledgeGraph load_snapshot(const std::filesystem::path& manifest, GraphSnapshotInfo* info) {
    std::ifstream in(manifest);
    if (!in) throw ConfigError("cannot open graph manifest: " + manifest.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("invalid graph manifest " + manifest.string() + ": " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "kgcal-graph") {
            throw ConfigError("not a graph manifest: " + manifest.string());
        }
        const auto entities = doc.at("entity_count").get<std::uint32_t>();
        const auto relations = doc.at("relation_count").get<std::uint32_t>();
        const auto expected = doc.at("triple_count").get<std::size_t>();
        GraphSnapshotInfo meta;
        meta.generator_seed = doc.at("generator_seed").get<std::uint64_t>();
        meta.drop_fraction = doc.at("drop_fraction").get<double>();
        meta.drop_seed = doc.at("drop_seed").get<std::uint64_t>();

        const auto triples_path = manifest.parent_path() / doc.at("triples_file").get<std::string>();
        std::ifstream tin(triples_path);
        if (!tin) throw ConfigError("cannot open snapshot triples: " + triples_path.string());
        std::vector<Triple> triples;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(tin, line)) {
            ++line_no;
            std::istringstream fields(line);
            std::uint64_t h = 0, r = 0, t = 0;
            char extra = 0;
            if (!(fields >> h >> r >> t) || (fields >> extra)) {
                throw ParseError("malformed snapshot line in " + triples_path.string(), line_no);
            }
            if (h >= entities || t >= entities || r >= relations) {
                throw ParseError("snapshot id out of range in " + triples_path.string(), line_no);
            }
            triples.push_back({EntityId{static_cast<std::uint32_t>(h)}, RelationId{static_cast<std::uint32_t>(r)},
                               EntityId{static_cast<std::uint32_t>(t)}});
        }
        auto graph = KnowledgeGraph::from_triples(entities, relations, std::move(triples));
        if (graph.triple_count() != expected) {
            throw ConfigError("snapshot triple count does not match its manifest");
        }
        graph.drop_edges(meta.drop_fraction, meta.drop_seed);
        if (info) *info = meta;
        return graph;
    } catch (const json::exception& e) {
        throw ConfigError("invalid graph manifest " + manifest.string() + ": " + e.what());
    }
}

}  // namespace kgcal
