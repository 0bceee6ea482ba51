#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kgcal/calib.hpp"
#include "kgcal/query.hpp"
#include "kgcal/scorer.hpp"

namespace kgcal {

struct GraphSpec {
    enum class Source { Synthetic, Triples, Snapshot };
    Source source = Source::Synthetic;
    std::uint32_t entities = 2000;
    std::uint32_t relations = 16;
    std::size_t triples = 40000;
    double uniform_mix = 0.5;
    std::filesystem::path path;  // Triples / Snapshot
};

struct ScorerSpec {
    ScorerPreset preset = ScorerPreset::Strong;
    std::optional<ScorerParams> params;  // overrides the preset's shapes
    std::optional<double> hard_negative;  // overrides the hard-negative share
    std::optional<std::uint64_t> seed;   // defaults to the derived "scorer" seed
    std::size_t top_k = 10;              // calibration-time frontier pruning

    ScorerParams resolved() const;
};

struct BaselineGrid {
    bool retrieval = true;
    bool union_bound = true;
    std::vector<double> static_neural{0.7, 0.8, 0.9, 0.99};
    std::vector<double> static_hybrid{0.4, 0.5, 0.6, 0.7};
};

struct SplitSizes {
    std::size_t opt = 600;
    std::size_t valid = 600;
    std::size_t eval = 300;

    std::size_t total() const noexcept { return opt + valid + eval; }
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    GraphSpec graph;
    std::vector<double> incompleteness{0.05, 0.20, 0.40};
    std::vector<TopologyId> topologies{TopologyId::ThreeP, TopologyId::TwoU, TopologyId::TwoIp};
    std::vector<double> risk_budgets{0.1, 0.2, 0.3, 0.4};
    SplitSizes splits;
    std::size_t frontier_cap = 50;
    ScorerSpec scorer;
    GateConfig gate;
    std::optional<std::size_t> runtime_top_k;
    std::size_t grid_size = 100;
    // Empty means the default strategy set for each topology.
    std::vector<ScalarizationStrategy> strategies;
    BaselineGrid baselines;
    unsigned workers = 0;  // 0 = hardware concurrency

    void validate() const;
    std::vector<ScalarizationStrategy> strategies_for(TopologyId topology) const;
};

// Named sub-seeds, all derived from the master seed.
struct SeedPlan {
    std::uint64_t master = 0;
    std::uint64_t graph = 0;
    std::uint64_t drop = 0;
    std::uint64_t scorer = 0;

    std::uint64_t workload(TopologyId topology) const;
    std::string describe() const;
};

SeedPlan seed_plan(const ExperimentConfig& config);

// JSON config; unknown keys are rejected with ConfigError. Relative graph
// paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_json(const ExperimentConfig& config);

}  // namespace kgcal
