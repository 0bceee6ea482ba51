#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgcal/exec.hpp"
#include "kgcal/query.hpp"

namespace kgcal {

// Step-interpolated empirical quantile: Q(p) is the ceil(p * n)-th order
// statistic, Q(0) the minimum.
class EmpiricalQuantile {
public:
    explicit EmpiricalQuantile(std::vector<double> sample);

    double operator()(double p) const;
    std::span<const double> sorted() const noexcept { return sorted_; }
    std::size_t size() const noexcept { return sorted_.size(); }

private:
    std::vector<double> sorted_;
};

EmpiricalQuantile fit_quantile(std::vector<double> sample);

// Per-slot exponents gamma_j > 0 applied in quantile space.
struct ScalarizationStrategy {
    std::vector<double> exponents;
    std::string label;

    void validate() const;
};

// Uniform, loose-early [1.5, 1, 0.5], tight-early [0.5, 1, 1.5], all-0.7 and
// all-1.5, truncated to k slots.
std::vector<ScalarizationStrategy> default_strategies(std::size_t k);
ScalarizationStrategy uniform_strategy(std::size_t k);

// lambda_j = Q_j(eta ^ gamma_j).
ThresholdVector scalarize(double eta, const ScalarizationStrategy& strategy,
                          std::span<const EmpiricalQuantile> quantiles);

// Evenly spaced grid over [0, 1] with both endpoints.
std::vector<double> eta_grid(std::size_t size);

struct RiskBudget {
    double alpha = 0.1;

    void validate() const;
};

struct RiskEstimate {
    double eta = 0.0;
    double empirical = 0.0;         // mean loss on D_opt
    double corrected = 0.0;         // n/(n+1) * empirical + 1/(n+1)
    double pruned_cardinality = 0.0;  // mean answer size under pruned execution
};

double corrected_risk(double empirical, std::size_t n) noexcept;

// Index of the largest grid point whose corrected risk is <= alpha, or
// nullopt when none qualifies. Grid must be sorted by eta.
std::optional<std::size_t> crc_select(std::span<const RiskEstimate> grid, RiskBudget budget, std::size_t n);

// Mean of 1 - |answers & truth| / |truth| under unrestricted execution.
double empirical_risk(const ThresholdVector& thresholds, std::span<const QueryInstance> workload,
                      const EngineContext& ctx);
double mean_cardinality(const ThresholdVector& thresholds, std::span<const QueryInstance> workload,
                        const EngineContext& ctx);

// Per-query record of a fully permissive execution whose intermediate
// frontiers are restricted to ground-truth entities plus the top-K inferred
// candidates per hop. Holds every (source, candidate) unified score needed to
// replay the query under any threshold vector without calling the scorer.
struct CandidateLattice {
    struct Node {
        NodeKind kind = NodeKind::Anchor;
        std::uint32_t slot = 0;
        std::uint32_t input = 0;            // projection: child node
        std::vector<std::uint32_t> children;  // set operators: child nodes
        std::vector<EntityId> entities;      // sorted candidate entities
        std::vector<std::uint8_t> truth;     // candidate is in the node's ground truth
        // Projection: incoming edges of candidate i live in
        // [edge_offsets[i], edge_offsets[i+1]), sorted by descending score.
        std::vector<std::uint32_t> edge_offsets;
        std::vector<std::uint32_t> edge_source;  // index into the input node's candidates
        std::vector<double> edge_score;
        std::vector<double> truth_input_best;    // best score from a ground-truth source, per candidate
        // Set operators: per child, candidate index in that child (-1 if absent).
        std::vector<std::vector<std::int32_t>> child_index;
    };

    std::vector<Node> nodes;
    std::vector<std::uint32_t> slot_nodes;
    std::size_t answer_count = 0;

    struct Outcome {
        std::size_t hits = 0;
        std::size_t cardinality = 0;
    };
    Outcome replay(const ThresholdVector& thresholds) const;
    // Fraction of the slot's ground truth admitted from ground-truth inputs.
    // Returns nullopt when the slot's ground truth is empty.
    std::optional<double> hop_recall(std::size_t slot, double lambda) const;
};

struct ScoreCollection {
    TopologyId topology = TopologyId::ThreeP;
    std::size_t k = 0;
    std::size_t top_k = 10;
    std::vector<std::vector<double>> samples;  // pooled ground-truth candidate scores per slot
    std::vector<CandidateLattice> lattices;    // one per D_opt query
};

ScoreCollection collect_scores(std::span<const QueryInstance> workload, TopologyId topology,
                               const EngineContext& ctx, std::size_t top_k);

struct CalibrationEntry {
    TopologyId topology = TopologyId::ThreeP;
    double alpha = 0.1;
    ThresholdVector thresholds;
    double eta = 0.0;
    std::string strategy;
    std::vector<double> exponents;
    double routing_threshold = 0.5;
    double margin = 1e-9;
    // Sorted per-slot samples behind the quantile functions; shared between
    // entries calibrated from the same collection.
    std::shared_ptr<const std::vector<std::vector<double>>> samples;
    std::size_t opt_size = 0;
    std::size_t valid_size = 0;
    std::uint64_t seed = 0;
    bool feasible = true;
    double valid_cardinality = 0.0;

    // Throws CalibrationError unless every threshold equals
    // Q_j(eta ^ gamma_j) and all scalar fields are in range.
    void validate() const;
};

class CalibrationTable {
public:
    void insert(CalibrationEntry entry);
    const CalibrationEntry* find(TopologyId topology, double alpha) const;
    std::vector<const CalibrationEntry*> entries() const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::pair<int, double>, CalibrationEntry> entries_;
};

std::string table_json(const CalibrationTable& table);
void write_table(const std::filesystem::path& path, const CalibrationTable& table);
CalibrationTable read_table(const std::filesystem::path& path);

struct CalibrationSettings {
    std::size_t grid_size = 100;
    std::size_t top_k = 10;
    std::uint64_t seed = 0;  // recorded in entries
};

// Offline calibration for one topology. Score collection and the per-strategy
// risk curves do not depend on alpha, so one Calibrator serves every budget.
// An audit attached to the context sees score collection only.
class Calibrator {
public:
    Calibrator(const EngineContext& ctx, TopologyId topology, std::span<const QueryInstance> d_opt,
               std::span<const QueryInstance> d_valid, std::vector<ScalarizationStrategy> strategies,
               CalibrationSettings settings = {});

    CalibrationEntry calibrate(RiskBudget budget) const;

    const ScoreCollection& collection() const noexcept { return collection_; }
    std::span<const EmpiricalQuantile> quantiles() const noexcept { return quantiles_; }
    std::span<const ScalarizationStrategy> strategies() const noexcept { return strategies_; }
    std::span<const RiskEstimate> risk_curve(std::size_t strategy) const { return curves_.at(strategy); }
    std::size_t opt_size() const noexcept { return d_opt_.size(); }

private:
    // Answer count summed over D_valid[begin, end) plus `carried`, or nullopt
    // once it exceeds `bound`.
    std::optional<std::size_t> valid_total(const ThresholdVector& thresholds, std::size_t begin, std::size_t end,
                                           std::size_t carried, std::size_t bound) const;

    EngineContext ctx_;
    TopologyId topology_;
    std::span<const QueryInstance> d_opt_;
    std::span<const QueryInstance> d_valid_;
    std::vector<ScalarizationStrategy> strategies_;
    CalibrationSettings settings_;
    ScoreCollection collection_;
    std::vector<EmpiricalQuantile> quantiles_;
    std::shared_ptr<const std::vector<std::vector<double>>> sorted_samples_;
    std::vector<std::vector<RiskEstimate>> curves_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::vector<double>, std::size_t> cardinality_cache_;
};

// Splits D_cal into the first opt_size queries (D_opt) and the rest (D_valid).
CalibrationEntry calibrate(TopologyId topology, RiskBudget budget, std::span<const QueryInstance> d_cal,
                           std::size_t opt_size, std::vector<ScalarizationStrategy> strategies,
                           const EngineContext& ctx, CalibrationSettings settings = {});

}  // namespace kgcal
