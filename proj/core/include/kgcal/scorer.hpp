#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/graph.hpp"
#include "kgcal/types.hpp"

namespace kgcal {

// Probabilistic triple scorer phi(h, r, t) -> [0, 1]. Implementations must be
// pure: the score of a triple never depends on call order or on which other
// candidates are scored alongside it.
class ScoreFunction {
public:
    virtual ~ScoreFunction() = default;

    virtual std::uint32_t entity_count() const noexcept = 0;
    virtual double score(const Triple& triple) const = 0;

    // phi(head, relation, t) for every entity t; out.size() == entity_count().
    virtual void score_row(EntityId head, RelationId relation, std::span<double> out) const;

    // Appends, in ascending entity order, every t with
    // phi(head, relation, t) * scale >= threshold.
    virtual void admit_row(EntityId head, RelationId relation, double scale, double threshold,
                           std::vector<EntityId>& out) const;
};

// Kumaraswamy(a, b) shape pair. It has the Beta family's shapes and a
// closed-form quantile, which keeps per-triple draws cheap.
struct ShapePair {
    double a = 1.0;
    double b = 1.0;

    double quantile(double u) const;
    double cdf(double x) const;
};

struct ScorerParams {
    ShapePair positive;  // triples in the complete graph
    ShapePair negative;  // everything else
    // Share of non-members scored from the positive shape: plausible false
    // triples a trained model ranks like facts. Without them the top of the
    // score range is free of false positives.
    double hard_negative = 0.0;

    void validate() const;
};

enum class ScorerPreset { Strong, Weak };

std::string_view to_string(ScorerPreset preset) noexcept;
ScorerPreset parse_preset(std::string_view name);

struct ScorerFidelity {
    ScorerPreset preset = ScorerPreset::Strong;
    ScorerParams params;
};

ScorerFidelity resolve_preset(ScorerPreset preset);

// Stand-in for a trained link predictor. Reads only the complete edge set:
// the score of (h, r, t) is drawn from the positive shape when the triple is
// a true fact and from the negative shape otherwise, with a seeded hash of
// the triple as the uniform variate.
class SyntheticOracleScorer final : public ScoreFunction {
public:
    SyntheticOracleScorer(const KnowledgeGraph& graph, ScorerParams params, std::uint64_t seed);

    std::uint32_t entity_count() const noexcept override { return graph_->entity_count(); }
    double score(const Triple& triple) const override;
    void score_row(EntityId head, RelationId relation, std::span<double> out) const override;
    void admit_row(EntityId head, RelationId relation, double scale, double threshold,
                   std::vector<EntityId>& out) const override;

    const ScorerParams& params() const noexcept { return params_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    double draw(double u, bool positive) const;

    const KnowledgeGraph* graph_;
    ScorerParams params_;
    std::uint64_t seed_;
};

struct ScoredCandidate {
    EntityId entity;
    double score = 0.0;
};

// One row per source. Dense rows list every entity in id order; with top_k
// set, rows keep the top_k highest scores sorted descending (ties by id).
struct FrontierScores {
    std::vector<EntityId> sources;
    std::vector<std::vector<ScoredCandidate>> rows;
};

FrontierScores score_frontier(const ScoreFunction& scorer, std::span<const EntityId> sources,
                              RelationId relation, std::optional<std::size_t> top_k = std::nullopt);

}  // namespace kgcal
