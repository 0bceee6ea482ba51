#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgcal/graph.hpp"
#include "kgcal/query.hpp"

namespace kgcal {

inline void PrintTo(EntityId e, std::ostream* os) { *os << "e" << e.index; }
inline void PrintTo(RelationId r, std::ostream* os) { *os << "r" << r.index; }

}  // namespace kgcal

namespace kgcal::testing {

// Small random graph with every triple drawn independently (duplicates are
// left in for from_triples to remove).
inline KnowledgeGraph random_graph(std::uint32_t entities, std::uint32_t relations, std::size_t triples,
                                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> e(0, entities - 1);
    std::uniform_int_distribution<std::uint32_t> r(0, relations - 1);
    std::vector<Triple> list;
    for (std::size_t i = 0; i < triples; ++i) list.push_back({EntityId{e(rng)}, RelationId{r(rng)}, EntityId{e(rng)}});
    return KnowledgeGraph::from_triples(entities, relations, std::move(list));
}

// Linear scan over the view's triples.
inline EntitySet scan_retrieve(const KnowledgeGraph& g, View view, const std::vector<EntityId>& sources,
                               RelationId r) {
    std::set<EntityId> out;
    const std::set<EntityId> src(sources.begin(), sources.end());
    const auto triples = g.triples();
    for (std::size_t i = 0; i < triples.size(); ++i) {
        if (view == View::Observed && !g.is_observed(i)) continue;
        if (triples[i].relation == r && src.contains(triples[i].head)) out.insert(triples[i].tail);
    }
    return {out.begin(), out.end()};
}

inline bool is_subset(const EntitySet& a, const EntitySet& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("kgcal_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace kgcal::testing
