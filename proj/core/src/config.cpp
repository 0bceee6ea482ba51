#include "kgcal/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kgcal/error.hpp"
#include "kgcal/hashing.hpp"

namespace kgcal {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
        if (!keys.contains(k)) throw ConfigError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

ShapePair read_shape(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(where + " must be a [a, b] pair");
    ShapePair s{j[0].get<double>(), j[1].get<double>()};
    if (!(s.a > 0.0 && s.b > 0.0)) throw ConfigError(where + " shapes must be positive");
    return s;
}

}  // namespace

ScorerParams ScorerSpec::resolved() const {
    auto p = params ? *params : resolve_preset(preset).params;
    if (params && !hard_negative) p.hard_negative = resolve_preset(preset).params.hard_negative;
    if (hard_negative) p.hard_negative = *hard_negative;
    return p;
}

void ExperimentConfig::validate() const {
    scorer.resolved().validate();
    if (graph.source == GraphSpec::Source::Synthetic) {
        if (graph.entities < 2 || graph.relations < 1 || graph.triples < 1) {
            throw ConfigError("synthetic graph needs >= 2 entities, >= 1 relation and >= 1 triple");
        }
        if (!(graph.uniform_mix > 0.0 && graph.uniform_mix <= 1.0)) {
            throw ConfigError("graph.synthetic.uniform_mix must lie in (0, 1]");
        }
    } else if (graph.path.empty()) {
        throw ConfigError("graph path is empty");
    }
    if (incompleteness.empty()) throw ConfigError("incompleteness list is empty");
    for (const double f : incompleteness) {
        if (!(f >= 0.0 && f < 1.0)) throw ConfigError("incompleteness fractions must lie in [0, 1)");
    }
    if (topologies.empty()) throw ConfigError("topology list is empty");
    for (const double a : risk_budgets) RiskBudget{a}.validate();
    if (splits.opt == 0 || splits.valid == 0 || splits.eval == 0) throw ConfigError("split sizes must be positive");
    if (frontier_cap == 0) throw ConfigError("frontier_cap must be positive");
    gate.validate();
    if (grid_size < 2) throw ConfigError("grid_size must be at least 2");
    for (const auto& s : strategies) s.validate();
    for (const double t : baselines.static_neural) {
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("static_neural thresholds must lie in [0, 1]");
    }
    for (const double t : baselines.static_hybrid) {
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("static_hybrid thresholds must lie in [0, 1]");
    }
}

std::vector<ScalarizationStrategy> ExperimentConfig::strategies_for(TopologyId topology) const {
    const std::size_t k = projection_count(topology);
    if (strategies.empty()) return default_strategies(k);
    std::vector<ScalarizationStrategy> out;
    for (auto s : strategies) {
        s.exponents.resize(k, s.exponents.back());
        out.push_back(std::move(s));
    }
    return out;
}

std::uint64_t SeedPlan::workload(TopologyId topology) const {
    return derive_seed(master, "workload:" + std::string(to_string(topology)));
}

std::string SeedPlan::describe() const {
    std::ostringstream s;
    s << "seeds master=" << master << " graph=" << graph << " drop=" << drop << " scorer=" << scorer;
    return s.str();
}

SeedPlan seed_plan(const ExperimentConfig& config) {
    SeedPlan p;
    p.master = config.seed;
    p.graph = derive_seed(config.seed, "graph");
    p.drop = derive_seed(config.seed, "drop");
    p.scorer = config.scorer.seed ? *config.scorer.seed : derive_seed(config.seed, "scorer");
    return p;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    try {
        check_keys(j, "", {"seed", "graph", "incompleteness", "topologies", "risk_budgets", "splits", "frontier_cap",
                           "scorer", "gate", "grid_size", "strategies", "baselines", "workers"});
        read(j, "seed", c.seed);
        if (j.contains("graph")) {
            const auto& g = j.at("graph");
            check_keys(g, "graph", {"synthetic", "triples_path", "snapshot"});
            if (g.size() != 1) throw ConfigError("graph needs exactly one of synthetic, triples_path, snapshot");
            if (g.contains("synthetic")) {
                const auto& s = g.at("synthetic");
                check_keys(s, "graph.synthetic", {"entities", "relations", "triples", "uniform_mix"});
                read(s, "entities", c.graph.entities);
                read(s, "relations", c.graph.relations);
                read(s, "triples", c.graph.triples);
                read(s, "uniform_mix", c.graph.uniform_mix);
            } else {
                const bool triples = g.contains("triples_path");
                c.graph.source = triples ? GraphSpec::Source::Triples : GraphSpec::Source::Snapshot;
                std::filesystem::path p = g.at(triples ? "triples_path" : "snapshot").get<std::string>();
                c.graph.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
            }
        }
        read(j, "incompleteness", c.incompleteness);
        if (j.contains("topologies")) {
            c.topologies.clear();
            for (const auto& t : j.at("topologies")) c.topologies.push_back(parse_topology(t.get<std::string>()));
        }
        read(j, "risk_budgets", c.risk_budgets);
        if (j.contains("splits")) {
            const auto& s = j.at("splits");
            check_keys(s, "splits", {"opt", "valid", "eval"});
            read(s, "opt", c.splits.opt);
            read(s, "valid", c.splits.valid);
            read(s, "eval", c.splits.eval);
        }
        read(j, "frontier_cap", c.frontier_cap);
        if (j.contains("scorer")) {
            const auto& s = j.at("scorer");
            check_keys(s, "scorer", {"preset", "positive", "negative", "hard_negative", "seed", "top_k"});
            if (s.contains("preset")) c.scorer.preset = parse_preset(s.at("preset").get<std::string>());
            if (s.contains("positive") != s.contains("negative")) {
                throw ConfigError("scorer.positive and scorer.negative must be given together");
            }
            if (s.contains("positive")) {
                c.scorer.params = ScorerParams{read_shape(s.at("positive"), "scorer.positive"),
                                               read_shape(s.at("negative"), "scorer.negative"), 0.0};
            }
            if (s.contains("hard_negative")) c.scorer.hard_negative = s.at("hard_negative").get<double>();
            if (s.contains("seed")) c.scorer.seed = s.at("seed").get<std::uint64_t>();
            read(s, "top_k", c.scorer.top_k);
        }
        if (j.contains("gate")) {
            const auto& g = j.at("gate");
            check_keys(g, "gate", {"delta", "epsilon", "runtime_top_k"});
            read(g, "delta", c.gate.routing_threshold);
            read(g, "epsilon", c.gate.margin);
            if (g.contains("runtime_top_k") && !g.at("runtime_top_k").is_null()) {
                c.runtime_top_k = g.at("runtime_top_k").get<std::size_t>();
            }
        }
        read(j, "grid_size", c.grid_size);
        if (j.contains("strategies")) {
            for (const auto& s : j.at("strategies")) {
                check_keys(s, "strategies[]", {"label", "exponents"});
                c.strategies.push_back({s.at("exponents").get<std::vector<double>>(), s.at("label").get<std::string>()});
            }
        }
        if (j.contains("baselines")) {
            const auto& b = j.at("baselines");
            check_keys(b, "baselines", {"retrieval", "union_bound", "static_neural", "static_hybrid"});
            read(b, "retrieval", c.baselines.retrieval);
            read(b, "union_bound", c.baselines.union_bound);
            read(b, "static_neural", c.baselines.static_neural);
            read(b, "static_hybrid", c.baselines.static_hybrid);
        }
        read(j, "workers", c.workers);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string config_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    switch (c.graph.source) {
        case GraphSpec::Source::Synthetic:
            j["graph"]["synthetic"] = {{"entities", c.graph.entities},
                                       {"relations", c.graph.relations},
                                       {"triples", c.graph.triples},
                                       {"uniform_mix", c.graph.uniform_mix}};
            break;
        case GraphSpec::Source::Triples:
            j["graph"]["triples_path"] = c.graph.path.string();
            break;
        case GraphSpec::Source::Snapshot:
            j["graph"]["snapshot"] = c.graph.path.string();
            break;
    }
    j["incompleteness"] = c.incompleteness;
    j["topologies"] = nlohmann::ordered_json::array();
    for (const auto t : c.topologies) j["topologies"].push_back(to_string(t));
    j["risk_budgets"] = c.risk_budgets;
    j["splits"] = {{"opt", c.splits.opt}, {"valid", c.splits.valid}, {"eval", c.splits.eval}};
    j["frontier_cap"] = c.frontier_cap;
    const auto p = c.scorer.resolved();
    j["scorer"] = {{"preset", to_string(c.scorer.preset)},
                   {"positive", {p.positive.a, p.positive.b}},
                   {"negative", {p.negative.a, p.negative.b}},
                   {"hard_negative", p.hard_negative}};
    if (c.scorer.seed) j["scorer"]["seed"] = *c.scorer.seed;
    j["scorer"]["top_k"] = c.scorer.top_k;
    j["gate"] = {{"delta", c.gate.routing_threshold}, {"epsilon", c.gate.margin}};
    if (c.runtime_top_k) j["gate"]["runtime_top_k"] = *c.runtime_top_k;
    j["grid_size"] = c.grid_size;
    if (!c.strategies.empty()) {
        for (const auto& s : c.strategies) j["strategies"].push_back({{"label", s.label}, {"exponents", s.exponents}});
    }
    j["baselines"] = {{"retrieval", c.baselines.retrieval},
                      {"union_bound", c.baselines.union_bound},
                      {"static_neural", c.baselines.static_neural},
                      {"static_hybrid", c.baselines.static_hybrid}};
    j["workers"] = c.workers;
    return j.dump(2) + "\n";
}

}  // namespace kgcal
