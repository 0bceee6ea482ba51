#include <benchmark/benchmark.h>

#include <memory>

#include "kgcal/calib.hpp"
#include "kgcal/exec.hpp"
#include "kgcal/graph.hpp"
#include "kgcal/scorer.hpp"

using namespace kgcal;

namespace {

// Default desk-scale graph at 20% incompleteness, built once.
struct World {
    KnowledgeGraph graph = generate_synthetic(2000, 16, 40000, 7);
    std::unique_ptr<SyntheticOracleScorer> scorer;
    EngineContext ctx;
    std::vector<QueryInstance> workload;

    World() {
        drop_edges(graph, 0.2, 11);
        scorer = std::make_unique<SyntheticOracleScorer>(graph, resolve_preset(ScorerPreset::Strong).params, 3);
        ctx.graph = &graph;
        ctx.scorer = scorer.get();
        workload = generate_workload(graph, TopologyId::ThreeP, 200, 50, 5);
    }
};

World& world() {
    static World w;
    return w;
}

std::vector<EntityId> sources(std::size_t n) {
    std::vector<EntityId> s;
    for (std::uint32_t i = 0; i < n; ++i) s.push_back(EntityId{i * 37 % 2000});
    std::sort(s.begin(), s.end());
    return s;
}

void BM_ScoreRow(benchmark::State& state) {
    auto& w = world();
    std::vector<double> row(w.graph.entity_count());
    std::uint32_t h = 0;
    for (auto _ : state) {
        w.scorer->score_row(EntityId{h++ % 2000}, RelationId{3}, row);
        benchmark::DoNotOptimize(row.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(row.size()));
}
BENCHMARK(BM_ScoreRow);

void BM_AdmitRow(benchmark::State& state) {
    auto& w = world();
    const double lambda = static_cast<double>(state.range(0)) / 100.0;
    std::vector<EntityId> out;
    std::uint32_t h = 0;
    for (auto _ : state) {
        out.clear();
        w.scorer->admit_row(EntityId{h++ % 2000}, RelationId{3}, 0.5 - 1e-9, lambda, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_AdmitRow)->Arg(10)->Arg(30)->Arg(45);

void BM_GateExecute(benchmark::State& state) {
    auto& w = world();
    const auto src = sources(static_cast<std::size_t>(state.range(0)));
    const double lambda = static_cast<double>(state.range(1)) / 100.0;
    for (auto _ : state) benchmark::DoNotOptimize(gate_execute(src, RelationId{2}, lambda, w.ctx));
}
BENCHMARK(BM_GateExecute)->Args({10, 60})->Args({10, 40})->Args({50, 40});

void BM_ExecuteQuery(benchmark::State& state) {
    auto& w = world();
    const ThresholdVector th{{0.45, 0.55, 0.45}};
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(execute_query(w.workload[i++ % w.workload.size()], th, w.ctx));
}
BENCHMARK(BM_ExecuteQuery);

void BM_CollectScores(benchmark::State& state) {
    auto& w = world();
    const auto d_opt = std::span(w.workload).first(50);
    for (auto _ : state) benchmark::DoNotOptimize(collect_scores(d_opt, TopologyId::ThreeP, w.ctx, 10));
}
BENCHMARK(BM_CollectScores)->Unit(benchmark::kMillisecond);

void BM_LatticeReplay(benchmark::State& state) {
    auto& w = world();
    static const auto collection = collect_scores(std::span(w.workload).first(100), TopologyId::ThreeP, w.ctx, 10);
    const ThresholdVector th{{0.45, 0.55, 0.45}};
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(collection.lattices[i++ % collection.lattices.size()].replay(th));
}
BENCHMARK(BM_LatticeReplay);

void BM_Calibrator(benchmark::State& state) {
    auto& w = world();
    for (auto _ : state) {
        Calibrator cal(w.ctx, TopologyId::ThreeP, std::span(w.workload).first(120), std::span(w.workload).last(80),
                       default_strategies(3));
        benchmark::DoNotOptimize(cal.calibrate({0.2}));
    }
}
BENCHMARK(BM_Calibrator)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
