#include "kgcal/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "kgcal/error.hpp"

namespace kgcal {

BaselineSpec BaselineSpec::static_neural(double theta) {
    BaselineSpec s;
    s.kind = BaselineKind::StaticNeural;
    s.theta = theta;
    return s;
}

BaselineSpec BaselineSpec::static_hybrid(double theta) {
    BaselineSpec s;
    s.kind = BaselineKind::StaticHybrid;
    s.theta = theta;
    return s;
}

BaselineSpec BaselineSpec::union_bound(double alpha, ThresholdVector thresholds) {
    BaselineSpec s;
    s.kind = BaselineKind::UnionBound;
    s.alpha = alpha;
    s.thresholds = std::move(thresholds);
    return s;
}

void BaselineSpec::validate() const {
    switch (kind) {
        case BaselineKind::RetrievalOnly:
            return;
        case BaselineKind::StaticNeural:
        case BaselineKind::StaticHybrid:
            if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("static baseline theta must lie in [0, 1]");
            return;
        case BaselineKind::UnionBound:
            RiskBudget{alpha}.validate();
            if (thresholds.size() == 0) throw ConfigError("union-bound baseline has no thresholds");
            return;
    }
}

std::string BaselineSpec::label() const {
    switch (kind) {
        case BaselineKind::RetrievalOnly: return "retrieval";
        case BaselineKind::StaticNeural: return "static_neural";
        case BaselineKind::StaticHybrid: return "static_hybrid";
        case BaselineKind::UnionBound: return "union_bound";
    }
    return "?";
}

bool UnionBoundResult::feasible() const {
    return std::all_of(slot_feasible.begin(), slot_feasible.end(), [](bool f) { return f; });
}

UnionBoundResult calibrate_union_bound(const ScoreCollection& collection, RiskBudget budget, std::size_t grid_size) {
    budget.validate();
    const std::size_t k = collection.k;
    const RiskBudget per_slot{budget.alpha / static_cast<double>(k)};
    const auto grid = eta_grid(grid_size);

    UnionBoundResult out;
    for (std::size_t j = 0; j < k; ++j) {
        const EmpiricalQuantile q(collection.samples[j]);
        std::vector<RiskEstimate> curve(grid.size());
        std::size_t n = 0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double lambda = q(grid[g]);
            double loss = 0.0;
            n = 0;
            for (const auto& lat : collection.lattices) {
                const auto recall = lat.hop_recall(j, lambda);
                if (!recall) continue;
                loss += 1.0 - *recall;
                ++n;
            }
            if (n == 0) throw CalibrationError("gate slot " + std::to_string(j) + " has no ground truth to calibrate on");
            curve[g] = {grid[g], loss / static_cast<double>(n), corrected_risk(loss / static_cast<double>(n), n), 0.0};
        }
        const auto pick = crc_select(curve, per_slot, n);
        out.slot_feasible.push_back(pick.has_value());
        out.slot_eta.push_back(pick ? grid[*pick] : 0.0);
        out.thresholds.values.push_back(q(out.slot_eta.back()));
    }
    return out;
}

namespace {

GateOutput retrieval_projection(std::span<const EntityId> sources, RelationId r, const EngineContext& ctx) {
    GateOutput out;
    out.stats.mode = GateMode::RetrievalOnly;
    out.stats.input_size = sources.size();
    out.entities = retrieve(ctx.graph_view(), sources, r);
    out.stats.output_size = out.entities.size();
    return out;
}

GateOutput neural_projection(std::span<const EntityId> sources, RelationId r, double theta,
                             const EngineContext& ctx) {
    GateOutput out;
    out.stats.mode = GateMode::InferenceOnly;
    out.stats.input_size = sources.size();
    const std::uint32_t n = ctx.graph->entity_count();
    std::vector<std::uint8_t> admitted(n, 0);
    std::vector<EntityId> buffer;
    for (const auto h : sources) {
        buffer.clear();
        ctx.scorer->admit_row(h, r, 1.0, theta, buffer);
        for (const auto t : buffer) admitted[t.index] = 1;
        out.stats.invocations += n;
    }
    for (std::uint32_t t = 0; t < n; ++t) {
        if (admitted[t]) out.entities.push_back(EntityId{t});
    }
    out.stats.output_size = out.entities.size();
    return out;
}

}  // namespace

ExecutionResult run_baseline(const BaselineSpec& spec, const QueryInstance& instance, const EngineContext& ctx) {
    spec.validate();
    switch (spec.kind) {
        case BaselineKind::RetrievalOnly:
            return execute_dag(instance.dag, [&](std::size_t, std::span<const EntityId> s, RelationId r) {
                return retrieval_projection(s, r, ctx);
            });
        case BaselineKind::StaticNeural:
            return execute_dag(instance.dag, [&](std::size_t, std::span<const EntityId> s, RelationId r) {
                return neural_projection(s, r, spec.theta, ctx);
            });
        case BaselineKind::StaticHybrid:
            return execute_query(instance, ThresholdVector{std::vector<double>(instance.dag.k(), spec.theta)}, ctx);
        case BaselineKind::UnionBound:
            return execute_query(instance, spec.thresholds, ctx);
    }
    throw ExecutionError("unknown baseline kind");
}

std::vector<double> static_neural_grid() { return {0.7, 0.8, 0.9, 0.99}; }
std::vector<double> static_hybrid_grid() { return {0.4, 0.5, 0.6, 0.7}; }

}  // namespace kgcal
