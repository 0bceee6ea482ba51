#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "kgcal/baselines.hpp"
#include "kgcal/calib.hpp"
#include "kgcal/config.hpp"
#include "kgcal/graph.hpp"
#include "kgcal/metrics.hpp"
#include "kgcal/scorer.hpp"

namespace kgcal {

// Graph plus scorer built from a config. The scorer reads the complete edge
// set only, so changing the incompleteness level never changes a score.
class Environment {
public:
    explicit Environment(const ExperimentConfig& config);

    const KnowledgeGraph& graph() const noexcept { return *graph_; }
    const ScoreFunction& scorer() const noexcept { return *scorer_; }
    const SeedPlan& seeds() const noexcept { return seeds_; }
    double incompleteness() const noexcept { return incompleteness_; }

    // Re-draws the observed mask. A fixed drop seed across fractions gives
    // nested masks: every edge hidden at 5% is also hidden at 20%.
    void set_incompleteness(double fraction);
    EngineContext context(ScoreAudit* audit = nullptr) const;

private:
    const ExperimentConfig* config_;
    std::unique_ptr<KnowledgeGraph> graph_;
    std::unique_ptr<ScoreFunction> scorer_;
    SeedPlan seeds_;
    double incompleteness_ = 0.0;
};

struct Splits {
    std::vector<QueryInstance> opt;
    std::vector<QueryInstance> valid;
    std::vector<QueryInstance> eval;
};

// One workload draw per topology, cut into disjoint D_opt / D_valid / D_eval.
Splits make_splits(const Environment& env, const ExperimentConfig& config, TopologyId topology);

using Executor = std::function<ExecutionResult(const QueryInstance&)>;

// Per-query rows followed by the aggregate row for one (strategy, param) group.
std::vector<ResultRow> evaluate_group(const std::string& strategy, TopologyId topology, double incompleteness,
                                      double param, std::span<const QueryInstance> workload,
                                      const Executor& execute, unsigned workers);

struct UnionBoundRecord {
    TopologyId topology = TopologyId::ThreeP;
    double incompleteness = 0.0;
    double alpha = 0.0;
    UnionBoundResult result;
};

struct ExperimentOutput {
    std::vector<ResultRow> rows;
    std::vector<std::pair<double, CalibrationTable>> tables;  // per incompleteness level
    std::vector<UnionBoundRecord> union_bound;
    std::uint64_t scores_retrieved = 0;
    std::uint64_t scores_inferred = 0;
    std::uint64_t score_violations = 0;
    // Scorer calls reported by retrieval-only gate slots; always zero.
    std::uint64_t retrieval_slot_invocations = 0;
    std::vector<std::string> warnings;
    std::string seeds;
};

using ProgressFn = std::function<void(const std::string&)>;

// Full sweep: for each incompleteness level and topology, calibrate ConRAD and
// the union bound on D_opt / D_valid, then run every strategy on D_eval.
ExperimentOutput run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

// Calibration table for every configured topology and budget at the
// environment's current incompleteness.
CalibrationTable calibrate_table(const Environment& env, const ExperimentConfig& config,
                                 const ProgressFn& progress = {});

// Runs every table entry matching the workload's topology. When `traces` is
// set, one JSON trace per (entry, query) is written to it.
std::vector<ResultRow> run_table(const CalibrationTable& table, std::span<const QueryInstance> workload,
                                 const Environment& env, unsigned workers, std::ostream* traces = nullptr);

// Retrieval and static baselines from the config grid (no calibration).
std::vector<ResultRow> run_static_baselines(const ExperimentConfig& config, std::span<const QueryInstance> workload,
                                            const Environment& env);

}  // namespace kgcal
