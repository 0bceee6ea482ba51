#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcal/graph.hpp"
#include "kgcal/query.hpp"
#include "kgcal/scorer.hpp"

namespace kgcal {

// One threshold per gate slot, each in [0, 1].
struct ThresholdVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t slot) const { return values[slot]; }
    bool operator==(const ThresholdVector&) const = default;
};

// Routing threshold delta splits [0, 1]: retrieval facts score in
// [delta, 1], inferred triples in [0, delta - margin].
struct GateConfig {
    double routing_threshold = 0.5;
    double margin = 1e-9;
    // Spreads retrieval facts over [delta, 1]; defaults to tiebreak_hash.
    double (*tiebreak)(const Triple&) = nullptr;

    void validate() const;
    double hash(const Triple& t) const;
};

enum class Provenance { Retrieved, Inferred };

struct UnifiedScore {
    double value = 0.0;
    Provenance provenance = Provenance::Inferred;
};

double retrieval_score(double tiebreak_value, const GateConfig& config) noexcept;
double inference_score(double phi, const GateConfig& config) noexcept;
UnifiedScore unified_score(const Triple& triple, bool observed, const ScoreFunction& scorer,
                           const GateConfig& config);

enum class GateMode { RetrievalOnly, Hybrid, InferenceOnly };

std::string_view to_string(GateMode mode) noexcept;

struct GateStats {
    GateMode mode = GateMode::RetrievalOnly;
    std::uint64_t invocations = 0;  // logical (source, candidate) scorer calls
    std::size_t input_size = 0;
    std::size_t output_size = 0;
};

struct ExecutionTrace {
    std::vector<GateStats> slots;  // indexed by gate slot
    std::size_t answer_size = 0;
    bool abstained = false;

    std::size_t hybrid_hops() const noexcept;
    std::uint64_t invocations() const noexcept;
};

// Counts unified scores by provenance and flags any that leave their band.
// Thread-safe; attach to an EngineContext to audit every score a run computes.
struct ScoreAudit {
    std::atomic<std::uint64_t> retrieved{0};
    std::atomic<std::uint64_t> inferred{0};
    std::atomic<std::uint64_t> violations{0};

    void record(const UnifiedScore& score, const GateConfig& config) noexcept;
    std::uint64_t total() const noexcept { return retrieved + inferred; }
};

// Shared, read-only state for executing queries.
struct EngineContext {
    const KnowledgeGraph* graph = nullptr;
    const ScoreFunction* scorer = nullptr;
    GateConfig gate;
    View view = View::Observed;
    // Escape hatch: cap inferred admissions per source. Off by default since
    // it turns the per-triple predicate into a rank-based one.
    std::optional<std::size_t> runtime_top_k;
    ScoreAudit* audit = nullptr;
    unsigned workers = 1;

    GraphView graph_view() const { return {graph, view}; }
};

struct GateOutput {
    EntitySet entities;
    GateStats stats;
};

// lambda >= delta: retrieval only, keeping facts whose unified score clears
// lambda. lambda < delta: every retrieval fact plus inferred tails with
// phi * (delta - margin) >= lambda.
GateOutput gate_execute(std::span<const EntityId> sources, RelationId relation, double lambda,
                        const EngineContext& ctx);

struct ExecutionResult {
    EntitySet answers;
    ExecutionTrace trace;
};

// Projection operator used by the DAG walker: (slot, sources, relation).
using ProjectionOperator = std::function<GateOutput(std::size_t, std::span<const EntityId>, RelationId)>;

// Evaluates the DAG in topological order with exact set operators and the
// given operator at every projection.
ExecutionResult execute_dag(const QueryDag& dag, const ProjectionOperator& project);

ExecutionResult execute_query(const QueryDag& dag, const ThresholdVector& thresholds, const EngineContext& ctx);
ExecutionResult execute_query(const QueryInstance& instance, const ThresholdVector& thresholds,
                              const EngineContext& ctx);

// One JSON object per query: topology, thresholds, per-slot stats, abstained
// flag and (optionally) the answer ids.
std::string trace_json(const QueryInstance& instance, const ThresholdVector& thresholds,
                       const ExecutionResult& result, bool include_answers);

}  // namespace kgcal
