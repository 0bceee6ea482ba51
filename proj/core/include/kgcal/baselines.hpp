#pragma once

#include <string>
#include <vector>

#include "kgcal/calib.hpp"
#include "kgcal/exec.hpp"
#include "kgcal/query.hpp"

namespace kgcal {

enum class BaselineKind { RetrievalOnly, StaticNeural, StaticHybrid, UnionBound };

struct BaselineSpec {
    BaselineKind kind = BaselineKind::RetrievalOnly;
    double theta = 0.0;          // static baselines
    double alpha = 0.1;          // union bound
    ThresholdVector thresholds;  // union bound, from calibrate_union_bound

    static BaselineSpec retrieval() { return {}; }
    static BaselineSpec static_neural(double theta);
    static BaselineSpec static_hybrid(double theta);
    static BaselineSpec union_bound(double alpha, ThresholdVector thresholds);

    void validate() const;
    // "retrieval", "static_neural", "static_hybrid" or "union_bound".
    std::string label() const;
};

struct UnionBoundResult {
    ThresholdVector thresholds;
    std::vector<bool> slot_feasible;
    std::vector<double> slot_eta;

    bool feasible() const;
};

// Independent scalar risk control per gate slot at budget alpha / k. The
// per-hop loss is the miss rate on Y^(j) when the slot's input is exactly its
// ground-truth frontier. Slots that cannot meet alpha / k fall back to their
// most permissive threshold and are flagged.
UnionBoundResult calibrate_union_bound(const ScoreCollection& collection, RiskBudget budget,
                                       std::size_t grid_size = 100);

ExecutionResult run_baseline(const BaselineSpec& spec, const QueryInstance& instance, const EngineContext& ctx);

// Paper grids for the static baselines.
std::vector<double> static_neural_grid();
std::vector<double> static_hybrid_grid();

}  // namespace kgcal
