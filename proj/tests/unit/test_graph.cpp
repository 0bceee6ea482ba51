#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "kgcal/error.hpp"
#include "kgcal/graph.hpp"
#include "support.hpp"

using namespace kgcal;
using kgcal::testing::random_graph;
using kgcal::testing::scan_retrieve;

namespace {

std::vector<Triple> as_vector(const KnowledgeGraph& g) { return {g.triples().begin(), g.triples().end()}; }

}  // namespace

TEST(SyntheticGraph, MinimalGraph) {
    const auto g = generate_synthetic(2, 1, 1, 0);
    ASSERT_EQ(g.triple_count(), 1u);
    const Triple t = g.triples()[0];
    EXPECT_LT(t.head.index, 2u);
    EXPECT_LT(t.tail.index, 2u);
    EXPECT_EQ(g.observed_count(), 1u);
}

TEST(SyntheticGraph, SizeWithinFivePercentAndNoDuplicates) {
    const auto g = generate_synthetic(2000, 16, 40000, 7);
    EXPECT_GE(g.triple_count(), 38000u);
    EXPECT_LE(g.triple_count(), 42000u);
    std::set<Triple> distinct(g.triples().begin(), g.triples().end());
    EXPECT_EQ(distinct.size(), g.triple_count());
    EXPECT_EQ(g.observed_count(), g.triple_count());
}

TEST(SyntheticGraph, DegreeDistributionIsSkewed) {
    const auto g = generate_synthetic(2000, 16, 40000, 7);
    std::vector<std::size_t> degree(g.entity_count());
    for (const auto& t : g.triples()) ++degree[t.head.index];
    std::sort(degree.rbegin(), degree.rend());
    const double mean = static_cast<double>(g.triple_count()) / g.entity_count();
    EXPECT_GT(static_cast<double>(degree.front()), 5.0 * mean);
}

TEST(SyntheticGraph, Deterministic) {
    EXPECT_EQ(as_vector(generate_synthetic(300, 4, 2000, 11)), as_vector(generate_synthetic(300, 4, 2000, 11)));
    EXPECT_NE(as_vector(generate_synthetic(300, 4, 2000, 11)), as_vector(generate_synthetic(300, 4, 2000, 12)));
}

TEST(SyntheticGraph, InvalidSizes) {
    EXPECT_THROW(generate_synthetic(1, 1, 1, 0), ConfigError);
    EXPECT_THROW(generate_synthetic(2, 0, 1, 0), ConfigError);
    EXPECT_THROW(generate_synthetic(2, 1, 0, 0), ConfigError);
    EXPECT_THROW(generate_synthetic(10, 1, 5, 0, {.uniform_mix = 0.0}), ConfigError);
}

TEST(LoadTriples, SingleLine) {
    kgcal::testing::TempDir dir;
    kgcal::testing::write_text(dir.file("g.tsv"), "a\tr\tb\n");
    const auto g = load_triples(dir.file("g.tsv"));
    EXPECT_EQ(g.entity_count(), 2u);
    EXPECT_EQ(g.relation_count(), 1u);
    EXPECT_EQ(g.triple_count(), 1u);
    EXPECT_EQ(g.entity_names, (std::vector<std::string>{"a", "b"}));
}

TEST(LoadTriples, DuplicateDropped) {
    kgcal::testing::TempDir dir;
    kgcal::testing::write_text(dir.file("g.tsv"), "a\tr\tb\na\tr\tb\n");
    EXPECT_EQ(load_triples(dir.file("g.tsv")).triple_count(), 1u);
}

TEST(LoadTriples, DistinctLineCountMatchesOracle) {
    kgcal::testing::TempDir dir;
    std::mt19937 rng(3);
    std::string text;
    std::set<std::string> lines;
    for (int i = 0; i < 400; ++i) {
        const std::string line = "e" + std::to_string(rng() % 30) + "\tr" + std::to_string(rng() % 3) + "\te" +
                                 std::to_string(rng() % 30);
        lines.insert(line);
        text += line + "\n";
    }
    kgcal::testing::write_text(dir.file("g.tsv"), text);
    EXPECT_EQ(load_triples(dir.file("g.tsv")).triple_count(), lines.size());
}

TEST(LoadTriples, MalformedLineReportsLineNumber) {
    kgcal::testing::TempDir dir;
    kgcal::testing::write_text(dir.file("g.tsv"), "a\tr\tb\na r b\n");
    try {
        load_triples(dir.file("g.tsv"));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(LoadTriples, EmptyOrMissingFile) {
    kgcal::testing::TempDir dir;
    kgcal::testing::write_text(dir.file("empty.tsv"), "");
    EXPECT_THROW(load_triples(dir.file("empty.tsv")), ConfigError);
    EXPECT_THROW(load_triples(dir.file("missing.tsv")), ConfigError);
}

TEST(DropEdges, ExactCounts) {
    auto g = generate_synthetic(2000, 16, 40000, 7);
    const auto n = g.triple_count();
    drop_edges(g, 0.0, 1);
    EXPECT_EQ(g.observed_count(), n);
    drop_edges(g, 0.2, 1);
    EXPECT_EQ(g.observed_count(), n - static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
}

TEST(DropEdges, FortyThousandTriples) {
    std::vector<Triple> list;
    for (std::uint32_t i = 0; i < 40000; ++i) list.push_back({EntityId{i % 200}, RelationId{0}, EntityId{i / 200}});
    auto g = KnowledgeGraph::from_triples(200, 1, list);
    ASSERT_EQ(g.triple_count(), 40000u);
    drop_edges(g, 0.20, 5);
    EXPECT_EQ(g.observed_count(), 32000u);
}

TEST(DropEdges, DeterministicAndNested) {
    auto a = generate_synthetic(500, 4, 5000, 2);
    auto b = a;
    drop_edges(a, 0.3, 9);
    drop_edges(b, 0.3, 9);
    EXPECT_TRUE(std::equal(a.observed_mask().begin(), a.observed_mask().end(), b.observed_mask().begin()));

    std::vector<std::uint8_t> smaller(a.observed_mask().begin(), a.observed_mask().end());
    drop_edges(a, 0.1, 9);
    for (std::size_t i = 0; i < smaller.size(); ++i) {
        if (smaller[i]) {
            EXPECT_TRUE(a.is_observed(i));
        }
    }
}

TEST(DropEdges, InvalidFraction) {
    auto g = generate_synthetic(50, 2, 100, 1);
    EXPECT_THROW(drop_edges(g, 1.0, 0), ConfigError);
    EXPECT_THROW(drop_edges(g, -0.1, 0), ConfigError);
}

TEST(DropEdges, ObservedSubsetOfCompleteAfterRepeatedDrops) {
    auto g = random_graph(40, 3, 300, 4);
    for (double f : {0.4, 0.05, 0.9, 0.2}) {
        drop_edges(g, f, 17);
        for (std::size_t i = 0; i < g.triple_count(); ++i) {
            const Triple t = g.triples()[i];
            EXPECT_EQ(g.contains(t, View::Observed), g.is_observed(i));
            EXPECT_TRUE(g.contains(t, View::Complete));
        }
    }
}

TEST(Retrieve, Trivial) {
    const auto g = KnowledgeGraph::from_triples(2, 1, {{EntityId{0}, RelationId{0}, EntityId{1}}});
    const GraphView complete{&g, View::Complete};
    EXPECT_TRUE(retrieve(complete, {}, RelationId{0}).empty());
    const std::vector<EntityId> src{EntityId{0}};
    EXPECT_EQ(retrieve(complete, src, RelationId{0}), (EntitySet{EntityId{1}}));
}

TEST(Retrieve, MatchesLinearScanOnRandomGraphs) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        auto g = random_graph(20, 3, 50, 100 + trial);
        drop_edges(g, 0.3, trial);
        std::vector<EntityId> sources;
        for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
            if (rng() % 4 == 0) sources.push_back(EntityId{e});
        }
        for (std::uint32_t r = 0; r < g.relation_count(); ++r) {
            for (View v : {View::Complete, View::Observed}) {
                const auto got = retrieve({&g, v}, sources, RelationId{r});
                EXPECT_EQ(got, scan_retrieve(g, v, sources, RelationId{r}));
            }
        }
    }
}

TEST(Retrieve, ObservedSubsetAndMonotone) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        auto g = random_graph(30, 2, 120, trial);
        drop_edges(g, 0.25, trial + 1);
        std::vector<EntityId> small, large;
        for (std::uint32_t e = 0; e < g.entity_count(); ++e) {
            const auto u = rng() % 3;
            if (u == 0) small.push_back(EntityId{e});
            if (u <= 1) large.push_back(EntityId{e});
        }
        for (std::uint32_t r = 0; r < 2; ++r) {
            const auto obs = retrieve({&g, View::Observed}, large, RelationId{r});
            const auto full = retrieve({&g, View::Complete}, large, RelationId{r});
            EXPECT_TRUE(kgcal::testing::is_subset(obs, full));
            EXPECT_TRUE(kgcal::testing::is_subset(retrieve({&g, View::Complete}, small, RelationId{r}), full));
            EXPECT_TRUE(std::is_sorted(full.begin(), full.end()));
            EXPECT_EQ(std::adjacent_find(full.begin(), full.end()), full.end());
        }
    }
}

TEST(Snapshot, RoundTripReproducesMask) {
    kgcal::testing::TempDir dir;
    auto g = generate_synthetic(300, 5, 3000, 8);
    drop_edges(g, 0.2, 44);
    save_snapshot(g, dir.file("snap.json"), {8, 0.2, 44});
    GraphSnapshotInfo info;
    const auto h = load_snapshot(dir.file("snap.json"), &info);
    EXPECT_EQ(info.generator_seed, 8u);
    EXPECT_EQ(info.drop_seed, 44u);
    EXPECT_DOUBLE_EQ(info.drop_fraction, 0.2);
    EXPECT_EQ(as_vector(g), as_vector(h));
    EXPECT_TRUE(std::equal(g.observed_mask().begin(), g.observed_mask().end(), h.observed_mask().begin()));
}
