#include "kgcal/exec.hpp"

#include <algorithm>

#include <json.hpp>

#include "kgcal/error.hpp"
#include "kgcal/hashing.hpp"

namespace kgcal {

void GateConfig::validate() const {
    if (!(routing_threshold > 0.0 && routing_threshold < 1.0)) {
        throw ConfigError("routing threshold delta must lie in (0, 1)");
    }
    if (!(margin > 0.0 && margin < routing_threshold)) {
        throw ConfigError("margin epsilon must lie in (0, delta)");
    }
}

double GateConfig::hash(const Triple& t) const {
    return tiebreak ? tiebreak(t) : tiebreak_hash(t);
}

double retrieval_score(double tiebreak_value, const GateConfig& config) noexcept {
    return config.routing_threshold + (1.0 - config.routing_threshold) * tiebreak_value;
}

double inference_score(double phi, const GateConfig& config) noexcept {
    return phi * (config.routing_threshold - config.margin);
}

UnifiedScore unified_score(const Triple& triple, bool observed, const ScoreFunction& scorer,
                           const GateConfig& config) {
    if (observed) return {retrieval_score(config.hash(triple), config), Provenance::Retrieved};
    return {inference_score(scorer.score(triple), config), Provenance::Inferred};
}

std::string_view to_string(GateMode mode) noexcept {
    switch (mode) {
        case GateMode::RetrievalOnly: return "retrieval";
        case GateMode::Hybrid: return "hybrid";
        case GateMode::InferenceOnly: return "inference";
    }
    return "?";
}

std::size_t ExecutionTrace::hybrid_hops() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const GateStats& s) { return s.mode != GateMode::RetrievalOnly; }));
}

std::uint64_t ExecutionTrace::invocations() const noexcept {
    std::uint64_t total = 0;
    for (const auto& s : slots) total += s.invocations;
    return total;
}

void ScoreAudit::record(const UnifiedScore& score, const GateConfig& config) noexcept {
    const double delta = config.routing_threshold;
    if (score.provenance == Provenance::Retrieved) {
        ++retrieved;
        if (!(score.value >= delta && score.value <= 1.0)) ++violations;
    } else {
        ++inferred;
        if (!(score.value >= 0.0 && score.value <= delta - config.margin)) ++violations;
    }
}

namespace {

EntitySet collect(const std::vector<std::uint8_t>& flags) {
    EntitySet out;
    for (std::uint32_t t = 0; t < flags.size(); ++t) {
        if (flags[t]) out.push_back(EntityId{t});
    }
    return out;
}

}  // namespace

GateOutput gate_execute(std::span<const EntityId> sources, RelationId relation, double lambda,
                        const EngineContext& ctx) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ExecutionError("gate threshold must lie in [0, 1]");
    const auto& cfg = ctx.gate;
    const GraphView view = ctx.graph_view();
    GateOutput out;
    out.stats.input_size = sources.size();

    if (lambda >= cfg.routing_threshold) {
        out.stats.mode = GateMode::RetrievalOnly;
        for (const auto h : sources) {
            for (const auto t : view.tails(h, relation)) {
                const UnifiedScore s{retrieval_score(cfg.hash({h, relation, t}), cfg), Provenance::Retrieved};
                if (ctx.audit) ctx.audit->record(s, cfg);
                if (s.value >= lambda) out.entities.push_back(t);
            }
        }
        std::sort(out.entities.begin(), out.entities.end());
        out.entities.erase(std::unique(out.entities.begin(), out.entities.end()), out.entities.end());
        out.stats.output_size = out.entities.size();
        return out;
    }

    out.stats.mode = GateMode::Hybrid;
    const std::uint32_t n = ctx.graph->entity_count();
    const double scale = cfg.routing_threshold - cfg.margin;
    std::vector<std::uint8_t> admitted(n, 0);
    std::vector<std::uint8_t> observed(n, 0);
    std::vector<double> row;
    std::vector<EntityId> buffer;

    for (const auto h : sources) {
        const auto facts = view.tails(h, relation);
        for (const auto t : facts) {
            admitted[t.index] = 1;
            observed[t.index] = 1;
        }
        out.stats.invocations += n - facts.size();

        if (ctx.audit || ctx.runtime_top_k) {
            row.resize(n);
            ctx.scorer->score_row(h, relation, row);
            if (ctx.audit) {
                for (const auto t : facts) {
                    ctx.audit->record({retrieval_score(cfg.hash({h, relation, t}), cfg), Provenance::Retrieved}, cfg);
                }
            }
            std::vector<ScoredCandidate> passing;
            for (std::uint32_t t = 0; t < n; ++t) {
                if (observed[t]) continue;
                const UnifiedScore s{inference_score(row[t], cfg), Provenance::Inferred};
                if (ctx.audit) ctx.audit->record(s, cfg);
                if (s.value >= lambda) passing.push_back({EntityId{t}, row[t]});
            }
            if (ctx.runtime_top_k && passing.size() > *ctx.runtime_top_k) {
                std::partial_sort(passing.begin(), passing.begin() + static_cast<std::ptrdiff_t>(*ctx.runtime_top_k),
                                  passing.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
                                      return a.score != b.score ? a.score > b.score : a.entity < b.entity;
                                  });
                passing.resize(*ctx.runtime_top_k);
            }
            for (const auto& c : passing) admitted[c.entity.index] = 1;
        } else {
            buffer.clear();
            ctx.scorer->admit_row(h, relation, scale, lambda, buffer);
            for (const auto t : buffer) admitted[t.index] = 1;
        }
        for (const auto t : facts) observed[t.index] = 0;
    }
    out.entities = collect(admitted);
    out.stats.output_size = out.entities.size();
    return out;
}

ExecutionResult execute_dag(const QueryDag& dag, const ProjectionOperator& project) {
    const auto nodes = dag.nodes();
    std::vector<EntitySet> outputs(nodes.size());
    ExecutionResult result;
    result.trace.slots.resize(dag.k());

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        switch (n.kind) {
            case NodeKind::Anchor:
                outputs[i] = {n.anchor};
                break;
            case NodeKind::Projection: {
                auto gate = project(n.gate_slot, outputs[n.children[0]], n.relation);
                result.trace.slots[n.gate_slot] = gate.stats;
                outputs[i] = std::move(gate.entities);
                break;
            }
            case NodeKind::Intersection: {
                EntitySet acc = outputs[n.children[0]];
                for (std::size_t c = 1; c < n.children.size(); ++c) {
                    EntitySet next;
                    const auto& rhs = outputs[n.children[c]];
                    std::set_intersection(acc.begin(), acc.end(), rhs.begin(), rhs.end(), std::back_inserter(next));
                    acc = std::move(next);
                }
                outputs[i] = std::move(acc);
                break;
            }
            case NodeKind::Union: {
                EntitySet acc;
                for (const auto c : n.children) {
                    EntitySet next;
                    std::set_union(acc.begin(), acc.end(), outputs[c].begin(), outputs[c].end(),
                                   std::back_inserter(next));
                    acc = std::move(next);
                }
                outputs[i] = std::move(acc);
                break;
            }
        }
    }
    result.answers = std::move(outputs[dag.sink()]);
    result.trace.answer_size = result.answers.size();
    result.trace.abstained = result.answers.empty();
    return result;
}

ExecutionResult execute_query(const QueryDag& dag, const ThresholdVector& thresholds, const EngineContext& ctx) {
    if (thresholds.size() != dag.k()) {
        throw ExecutionError("threshold vector has " + std::to_string(thresholds.size()) + " entries, query has " +
                             std::to_string(dag.k()) + " gate slots");
    }
    for (const double v : thresholds.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw ExecutionError("threshold components must lie in [0, 1]");
    }
    return execute_dag(dag, [&](std::size_t slot, std::span<const EntityId> sources, RelationId r) {
        return gate_execute(sources, r, thresholds[slot], ctx);
    });
}

ExecutionResult execute_query(const QueryInstance& instance, const ThresholdVector& thresholds,
                              const EngineContext& ctx) {
    return execute_query(instance.dag, thresholds, ctx);
}

std::string trace_json(const QueryInstance& instance, const ThresholdVector& thresholds,
                       const ExecutionResult& result, bool include_answers) {
    nlohmann::ordered_json j;
    j["topology"] = to_string(instance.topology);
    j["thresholds"] = thresholds.values;
    j["slots"] = nlohmann::ordered_json::array();
    for (const auto& s : result.trace.slots) {
        j["slots"].push_back({{"mode", to_string(s.mode)},
                              {"invocations", s.invocations},
                              {"input_size", s.input_size},
                              {"output_size", s.output_size}});
    }
    j["answer_size"] = result.trace.answer_size;
    j["abstained"] = result.trace.abstained;
    if (include_answers) {
        j["answers"] = nlohmann::ordered_json::array();
        for (const auto e : result.answers) j["answers"].push_back(e.index);
    }
    return j.dump();
}

}  // namespace kgcal
