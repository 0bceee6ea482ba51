#include <gtest/gtest.h>

#include "kgcal/baselines.hpp"
#include "kgcal/error.hpp"
#include "kgcal/outcome.hpp"
#include "support.hpp"

using namespace kgcal;

namespace {

struct Env {
    KnowledgeGraph graph;
    SyntheticOracleScorer scorer;
    EngineContext ctx;

    explicit Env(double drop, std::uint64_t seed = 41)
        : graph(generate_synthetic(600, 6, 6000, seed)),
          scorer(graph, resolve_preset(ScorerPreset::Strong).params, seed + 1) {
        drop_edges(graph, drop, seed + 2);
        ctx.graph = &graph;
        ctx.scorer = &scorer;
    }
};

}  // namespace

TEST(BaselineSpec, Validation) {
    EXPECT_NO_THROW(BaselineSpec::retrieval().validate());
    EXPECT_NO_THROW(BaselineSpec::static_neural(0.99).validate());
    EXPECT_THROW(BaselineSpec::static_neural(1.5).validate(), ConfigError);
    EXPECT_THROW(BaselineSpec::static_hybrid(-0.1).validate(), ConfigError);
    EXPECT_THROW(BaselineSpec::union_bound(1.0, {{0.5}}).validate(), ConfigError);
    EXPECT_EQ(BaselineSpec::static_hybrid(0.4).label(), "static_hybrid");
    EXPECT_EQ(static_neural_grid(), (std::vector<double>{0.7, 0.8, 0.9, 0.99}));
    EXPECT_EQ(static_hybrid_grid(), (std::vector<double>{0.4, 0.5, 0.6, 0.7}));
}

TEST(RetrievalBaseline, PrecisionOneAndZeroCalls) {
    Env env(0.2);
    for (auto topo : {TopologyId::ThreeP, TopologyId::TwoU, TopologyId::TwoIp}) {
        for (const auto& q : generate_workload(env.graph, topo, 60, 50, 1)) {
            const auto r = run_baseline(BaselineSpec::retrieval(), q, env.ctx);
            EXPECT_TRUE(kgcal::testing::is_subset(r.answers, q.truth.final));
            EXPECT_EQ(r.answers, evaluate_exact(q.dag, {&env.graph, View::Observed}).back());
            EXPECT_EQ(r.trace.invocations(), 0u);
        }
    }
}

TEST(RetrievalBaseline, NearCompleteUnionIsPrecise) {
    Env env(0.01);
    double precision = 0;
    const auto w = generate_workload(env.graph, TopologyId::TwoU, 100, 50, 2);
    for (const auto& q : w) precision += compare_answers(run_baseline(BaselineSpec::retrieval(), q, env.ctx).answers, q.truth.final).precision();
    EXPECT_GE(precision / 100, 0.95);
}

TEST(StaticNeural, ThetaOneAbstains) {
    Env env(0.2);
    for (const auto& q : generate_workload(env.graph, TopologyId::ThreeP, 20, 50, 3)) {
        const auto r = run_baseline(BaselineSpec::static_neural(1.0), q, env.ctx);
        EXPECT_TRUE(r.answers.empty());
        EXPECT_TRUE(r.trace.abstained);
    }
}

TEST(StaticNeural, ThresholdsRawScoresEverywhere) {
    Env env(0.2);
    const auto q = generate_workload(env.graph, TopologyId::OneP, 1, 50, 4)[0];
    const auto r = run_baseline(BaselineSpec::static_neural(0.7), q, env.ctx);
    EntitySet expected;
    for (std::uint32_t t = 0; t < env.graph.entity_count(); ++t) {
        if (env.scorer.score({q.anchors[0], q.relations[0], EntityId{t}}) >= 0.7) expected.push_back(EntityId{t});
    }
    EXPECT_EQ(r.answers, expected);
    EXPECT_EQ(r.trace.slots[0].mode, GateMode::InferenceOnly);
    EXPECT_EQ(r.trace.invocations(), env.graph.entity_count());
}

TEST(StaticHybrid, MatchesUniformGate) {
    Env env(0.2);
    for (const auto& q : generate_workload(env.graph, TopologyId::TwoIp, 20, 50, 5)) {
        for (double theta : static_hybrid_grid()) {
            const auto r = run_baseline(BaselineSpec::static_hybrid(theta), q, env.ctx);
            const auto g = execute_query(q, ThresholdVector{std::vector<double>(3, theta)}, env.ctx);
            EXPECT_EQ(r.answers, g.answers);
        }
    }
}

TEST(UnionBound, SingleSlotEqualsJointCalibration) {
    Env env(0.2);
    const auto w = generate_workload(env.graph, TopologyId::OneP, 150, 50, 6);
    Calibrator cal(env.ctx, TopologyId::OneP, std::span(w).first(100), std::span(w).last(50), {uniform_strategy(1)});
    for (double alpha : {0.1, 0.2, 0.3}) {
        const auto ub = calibrate_union_bound(cal.collection(), {alpha});
        EXPECT_TRUE(ub.feasible());
        EXPECT_EQ(ub.thresholds, cal.calibrate({alpha}).thresholds) << alpha;
    }
}

TEST(UnionBound, HeldOutRecallMeetsTarget) {
    Env env(0.2);
    const auto w = generate_workload(env.graph, TopologyId::ThreeP, 500, 50, 7);
    const auto d_opt = std::span(w).first(300);
    const auto held = std::span(w).last(200);
    const auto c = collect_scores(d_opt, TopologyId::ThreeP, env.ctx, 10);
    for (double alpha : {0.2, 0.3, 0.4}) {
        const auto ub = calibrate_union_bound(c, {alpha});
        ASSERT_EQ(ub.thresholds.size(), 3u);
        double recall = 0;
        for (const auto& q : held) {
            recall += compare_answers(run_baseline(BaselineSpec::union_bound(alpha, ub.thresholds), q, env.ctx).answers,
                                      q.truth.final).recall();
        }
        // Sampling slack for 200 held-out queries.
        EXPECT_GE(recall / 200, 1 - alpha - 0.05) << alpha;
    }
}

TEST(UnionBound, InfeasibleSlotIsFlagged) {
    Env env(0.2);
    const auto w = generate_workload(env.graph, TopologyId::TwoU, 10, 50, 8);
    const auto c = collect_scores(w, TopologyId::TwoU, env.ctx, 10);
    // alpha / k = 0.05 < 1 / 11.
    const auto ub = calibrate_union_bound(c, {0.1});
    EXPECT_FALSE(ub.feasible());
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_FALSE(ub.slot_feasible[j]);
        EXPECT_EQ(ub.thresholds[j], fit_quantile(c.samples[j])(0.0));
    }
}
