#include "kgcal/calib.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "kgcal/error.hpp"
#include "kgcal/outcome.hpp"
#include "kgcal/parallel.hpp"

namespace kgcal {

EmpiricalQuantile::EmpiricalQuantile(std::vector<double> sample) : sorted_(std::move(sample)) {
    if (sorted_.empty()) throw CalibrationError("empirical quantile needs a non-empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalQuantile::operator()(double p) const {
    const auto n = sorted_.size();
    if (!(p > 0.0)) return sorted_.front();
    if (p >= 1.0) return sorted_.back();
    // ceil(p * n) with a small guard so p * n landing a hair above an
    // integer does not skip an order statistic.
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted_[rank - 1];
}

EmpiricalQuantile fit_quantile(std::vector<double> sample) { return EmpiricalQuantile(std::move(sample)); }

void ScalarizationStrategy::validate() const {
    if (exponents.empty()) throw ConfigError("strategy '" + label + "' has no exponents");
    for (const double g : exponents) {
        if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("strategy '" + label + "' needs positive exponents");
    }
}

ScalarizationStrategy uniform_strategy(std::size_t k) { return {std::vector<double>(k, 1.0), "uniform"}; }

std::vector<ScalarizationStrategy> default_strategies(std::size_t k) {
    auto truncated = [k](std::vector<double> g) {
        g.resize(k, g.empty() ? 1.0 : g.back());
        return g;
    };
    return {
        uniform_strategy(k),
        {truncated({1.5, 1.0, 0.5}), "loose-early"},
        {truncated({0.5, 1.0, 1.5}), "tight-early"},
        {std::vector<double>(k, 0.7), "all-0.7"},
        {std::vector<double>(k, 1.5), "all-1.5"},
    };
}

ThresholdVector scalarize(double eta, const ScalarizationStrategy& strategy,
                          std::span<const EmpiricalQuantile> quantiles) {
    if (strategy.exponents.size() != quantiles.size()) {
        throw CalibrationError("strategy '" + strategy.label + "' does not match the slot count");
    }
    eta = std::clamp(eta, 0.0, 1.0);
    ThresholdVector out;
    out.values.reserve(quantiles.size());
    for (std::size_t j = 0; j < quantiles.size(); ++j) {
        out.values.push_back(quantiles[j](std::pow(eta, strategy.exponents[j])));
    }
    return out;
}

std::vector<double> eta_grid(std::size_t size) {
    if (size < 2) throw ConfigError("eta grid needs at least two points");
    std::vector<double> grid(size);
    for (std::size_t i = 0; i < size; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(size - 1);
    return grid;
}

void RiskBudget::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("risk budget alpha must lie in (0, 1)");
}

double corrected_risk(double empirical, std::size_t n) noexcept {
    const double m = static_cast<double>(n);
    return m / (m + 1.0) * empirical + 1.0 / (m + 1.0);
}

std::optional<std::size_t> crc_select(std::span<const RiskEstimate> grid, RiskBudget budget, std::size_t n) {
    if (n == 0) throw CalibrationError("risk control needs at least one calibration query");
    budget.validate();
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0 && grid[i].eta < grid[i - 1].eta) throw CalibrationError("risk grid must be sorted by eta");
        if (grid[i].corrected <= budget.alpha) best = i;
    }
    return best;
}

namespace {

std::vector<ExecutionResult> run_all(const ThresholdVector& thresholds, std::span<const QueryInstance> workload,
                                     const EngineContext& ctx) {
    std::vector<ExecutionResult> results(workload.size());
    parallel_for(workload.size(), ctx.workers,
                 [&](std::size_t i) { results[i] = execute_query(workload[i], thresholds, ctx); });
    return results;
}

}  // namespace

double empirical_risk(const ThresholdVector& thresholds, std::span<const QueryInstance> workload,
                      const EngineContext& ctx) {
    if (workload.empty()) return 0.0;
    const auto results = run_all(thresholds, workload, ctx);
    double total = 0.0;
    for (std::size_t i = 0; i < workload.size(); ++i) {
        total += compare_answers(results[i].answers, workload[i].truth.final).loss();
    }
    return total / static_cast<double>(workload.size());
}

double mean_cardinality(const ThresholdVector& thresholds, std::span<const QueryInstance> workload,
                        const EngineContext& ctx) {
    if (workload.empty()) return 0.0;
    const auto results = run_all(thresholds, workload, ctx);
    double total = 0.0;
    for (const auto& r : results) total += static_cast<double>(r.answers.size());
    return total / static_cast<double>(workload.size());
}

// ---------------------------------------------------------------------------
// Candidate lattices

CandidateLattice::Outcome CandidateLattice::replay(const ThresholdVector& thresholds) const {
    std::vector<std::vector<std::uint8_t>> alive(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        auto& out = alive[i];
        out.assign(n.entities.size(), 0);
        switch (n.kind) {
            case NodeKind::Anchor:
                std::fill(out.begin(), out.end(), 1);
                break;
            case NodeKind::Projection: {
                const double lambda = thresholds[n.slot];
                const auto& in = alive[n.input];
                for (std::size_t c = 0; c < n.entities.size(); ++c) {
                    for (auto e = n.edge_offsets[c]; e < n.edge_offsets[c + 1]; ++e) {
                        if (n.edge_score[e] < lambda) break;
                        if (in[n.edge_source[e]]) {
                            out[c] = 1;
                            break;
                        }
                    }
                }
                break;
            }
            case NodeKind::Intersection:
            case NodeKind::Union: {
                const bool all = n.kind == NodeKind::Intersection;
                for (std::size_t c = 0; c < n.entities.size(); ++c) {
                    bool v = all;
                    for (std::size_t ch = 0; ch < n.children.size(); ++ch) {
                        const auto idx = n.child_index[ch][c];
                        const bool a = idx >= 0 && alive[n.children[ch]][static_cast<std::size_t>(idx)] != 0;
                        v = all ? (v && a) : (v || a);
                    }
                    out[c] = v ? 1 : 0;
                }
                break;
            }
        }
    }
    Outcome o;
    const auto& sink = nodes.back();
    const auto& a = alive.back();
    for (std::size_t c = 0; c < sink.entities.size(); ++c) {
        if (!a[c]) continue;
        ++o.cardinality;
        if (sink.truth[c]) ++o.hits;
    }
    return o;
}

std::optional<double> CandidateLattice::hop_recall(std::size_t slot, double lambda) const {
    const auto& n = nodes.at(slot_nodes.at(slot));
    std::size_t truth = 0;
    std::size_t admitted = 0;
    for (std::size_t c = 0; c < n.entities.size(); ++c) {
        if (!n.truth[c]) continue;
        ++truth;
        if (n.truth_input_best[c] >= lambda) ++admitted;
    }
    if (truth == 0) return std::nullopt;
    return static_cast<double>(admitted) / static_cast<double>(truth);
}

namespace {

bool contains_sorted(const EntitySet& set, EntityId e) { return std::binary_search(set.begin(), set.end(), e); }

// Builds one query's lattice. For every ground-truth candidate of a slot, the
// best unified score reaching it from a ground-truth input goes to
// samples[slot]: the quantile functions describe how true answers score.
CandidateLattice build_lattice(const QueryInstance& q, const EngineContext& ctx, std::size_t top_k,
                               std::vector<std::vector<double>>& samples) {
    const auto& cfg = ctx.gate;
    const auto dag_nodes = q.dag.nodes();
    const std::uint32_t n_entities = ctx.graph->entity_count();
    const GraphView view = ctx.graph_view();

    CandidateLattice lat;
    lat.nodes.resize(dag_nodes.size());
    lat.slot_nodes.assign(q.dag.k(), 0);
    std::vector<double> table;
    std::vector<double> best(n_entities);

    for (std::size_t i = 0; i < dag_nodes.size(); ++i) {
        const auto& dn = dag_nodes[i];
        auto& node = lat.nodes[i];
        node.kind = dn.kind;
        switch (dn.kind) {
            case NodeKind::Anchor:
                node.entities = {dn.anchor};
                node.truth = {1};
                break;
            case NodeKind::Projection: {
                node.slot = dn.gate_slot;
                node.input = dn.children[0];
                lat.slot_nodes[dn.gate_slot] = static_cast<std::uint32_t>(i);
                const auto& input = lat.nodes[node.input];
                const auto& truth = q.truth.per_projection[dn.gate_slot];
                const std::size_t m = input.entities.size();

                // Unified score table: retrieval score on observed edges,
                // scaled model score everywhere else.
                table.assign(m * n_entities, 0.0);
                for (std::size_t s = 0; s < m; ++s) {
                    const auto h = input.entities[s];
                    std::span<double> row(table.data() + s * n_entities, n_entities);
                    ctx.scorer->score_row(h, dn.relation, row);
                    for (auto& v : row) v = inference_score(v, cfg);
                    for (const auto t : view.tails(h, dn.relation)) {
                        row[t.index] = retrieval_score(cfg.hash({h, dn.relation, t}), cfg);
                    }
                    if (ctx.audit) {
                        const auto facts = view.tails(h, dn.relation);
                        for (std::uint32_t t = 0; t < n_entities; ++t) {
                            const bool obs = std::binary_search(facts.begin(), facts.end(), EntityId{t});
                            ctx.audit->record({row[t], obs ? Provenance::Retrieved : Provenance::Inferred}, cfg);
                        }
                    }
                }
                std::fill(best.begin(), best.end(), -1.0);
                for (std::size_t s = 0; s < m; ++s) {
                    const double* row = table.data() + s * n_entities;
                    for (std::uint32_t t = 0; t < n_entities; ++t) best[t] = std::max(best[t], row[t]);
                }

                std::vector<ScoredCandidate> others;
                others.reserve(n_entities);
                for (std::uint32_t t = 0; t < n_entities; ++t) {
                    if (!contains_sorted(truth, EntityId{t})) others.push_back({EntityId{t}, best[t]});
                }
                const auto keep = std::min(top_k, others.size());
                std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(keep), others.end(),
                                  [](const ScoredCandidate& a, const ScoredCandidate& b) {
                                      return a.score != b.score ? a.score > b.score : a.entity < b.entity;
                                  });
                node.entities = truth;
                for (std::size_t c = 0; c < keep; ++c) node.entities.push_back(others[c].entity);
                std::sort(node.entities.begin(), node.entities.end());

                const std::size_t c_count = node.entities.size();
                node.truth.resize(c_count);
                node.truth_input_best.assign(c_count, -std::numeric_limits<double>::infinity());
                node.edge_offsets.assign(1, 0);
                std::vector<std::pair<double, std::uint32_t>> edges;
                for (std::size_t c = 0; c < c_count; ++c) {
                    const auto t = node.entities[c];
                    node.truth[c] = contains_sorted(truth, t) ? 1 : 0;
                    edges.clear();
                    for (std::size_t s = 0; s < m; ++s) {
                        const double v = table[s * n_entities + t.index];
                        edges.emplace_back(v, static_cast<std::uint32_t>(s));
                        if (input.truth[s]) node.truth_input_best[c] = std::max(node.truth_input_best[c], v);
                    }
                    std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
                        return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
                    for (const auto& [v, s] : edges) {
                        node.edge_score.push_back(v);
                        node.edge_source.push_back(s);
                    }
                    node.edge_offsets.push_back(static_cast<std::uint32_t>(node.edge_score.size()));
                    if (node.truth[c]) samples[dn.gate_slot].push_back(node.truth_input_best[c]);
                }
                break;
            }
            case NodeKind::Intersection:
            case NodeKind::Union: {
                const bool all = dn.kind == NodeKind::Intersection;
                node.children = dn.children;
                EntitySet acc = lat.nodes[dn.children[0]].entities;
                for (std::size_t c = 1; c < dn.children.size(); ++c) {
                    const auto& rhs = lat.nodes[dn.children[c]].entities;
                    EntitySet next;
                    if (all) {
                        std::set_intersection(acc.begin(), acc.end(), rhs.begin(), rhs.end(),
                                              std::back_inserter(next));
                    } else {
                        std::set_union(acc.begin(), acc.end(), rhs.begin(), rhs.end(), std::back_inserter(next));
                    }
                    acc = std::move(next);
                }
                node.entities = std::move(acc);
                node.child_index.assign(dn.children.size(), std::vector<std::int32_t>(node.entities.size(), -1));
                node.truth.assign(node.entities.size(), all ? 1 : 0);
                for (std::size_t ch = 0; ch < dn.children.size(); ++ch) {
                    const auto& child = lat.nodes[dn.children[ch]];
                    for (std::size_t c = 0; c < node.entities.size(); ++c) {
                        const auto it =
                            std::lower_bound(child.entities.begin(), child.entities.end(), node.entities[c]);
                        const bool present = it != child.entities.end() && *it == node.entities[c];
                        const bool t = present && child.truth[static_cast<std::size_t>(it - child.entities.begin())];
                        if (present) node.child_index[ch][c] = static_cast<std::int32_t>(it - child.entities.begin());
                        node.truth[c] = all ? (node.truth[c] && t) : (node.truth[c] || t);
                    }
                }
                break;
            }
        }
    }

    const auto& sink = lat.nodes.back();
    lat.answer_count = q.truth.final.size();
    const auto sink_truth = static_cast<std::size_t>(std::count(sink.truth.begin(), sink.truth.end(), 1));
    if (sink_truth != lat.answer_count) {
        throw CalibrationError("candidate lattice lost ground-truth answers for a " +
                               std::string(to_string(q.topology)) + " query");
    }
    return lat;
}

}  // namespace

ScoreCollection collect_scores(std::span<const QueryInstance> workload, TopologyId topology,
                               const EngineContext& ctx, std::size_t top_k) {
    if (workload.empty()) throw CalibrationError("score collection needs a non-empty workload");
    const std::size_t k = projection_count(topology);
    ScoreCollection out;
    out.topology = topology;
    out.k = k;
    out.top_k = top_k;
    out.lattices.resize(workload.size());
    std::vector<std::vector<std::vector<double>>> per_query(workload.size(), std::vector<std::vector<double>>(k));
    parallel_for(workload.size(), ctx.workers, [&](std::size_t i) {
        if (workload[i].topology != topology || workload[i].dag.k() != k) {
            throw CalibrationError("workload query " + std::to_string(i) + " is not a " +
                                   std::string(to_string(topology)) + " query");
        }
        out.lattices[i] = build_lattice(workload[i], ctx, top_k, per_query[i]);
    });
    out.samples.assign(k, {});
    for (const auto& q : per_query) {
        for (std::size_t j = 0; j < k; ++j) out.samples[j].insert(out.samples[j].end(), q[j].begin(), q[j].end());
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (out.samples[j].empty()) throw CalibrationError("no scores collected for gate slot " + std::to_string(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entries and tables

void CalibrationEntry::validate() const {
    RiskBudget{alpha}.validate();
    GateConfig{routing_threshold, margin}.validate();
    if (!(eta >= 0.0 && eta <= 1.0)) throw CalibrationError("calibration entry eta outside [0, 1]");
    if (!samples) throw CalibrationError("calibration entry has no quantile samples");
    const std::size_t k = projection_count(topology);
    if (thresholds.size() != k || exponents.size() != k || samples->size() != k) {
        throw CalibrationError("calibration entry does not match the " + std::string(to_string(topology)) +
                               " slot count");
    }
    if (valid_cardinality < 0.0) throw CalibrationError("calibration entry has negative cardinality");
    ScalarizationStrategy{exponents, strategy}.validate();
    std::vector<EmpiricalQuantile> q;
    for (const auto& s : *samples) {
        if (!std::is_sorted(s.begin(), s.end())) throw CalibrationError("calibration samples must be sorted");
        q.emplace_back(s);
    }
    const auto expected = scalarize(eta, ScalarizationStrategy{exponents, strategy}, q);
    if (expected != thresholds) {
        throw CalibrationError("calibration thresholds do not match the quantile samples");
    }
}

void CalibrationTable::insert(CalibrationEntry entry) {
    const std::pair key{static_cast<int>(entry.topology), entry.alpha};
    if (entries_.contains(key)) {
        throw CalibrationError("duplicate calibration entry for " + std::string(to_string(entry.topology)));
    }
    entries_.emplace(key, std::move(entry));
}

const CalibrationEntry* CalibrationTable::find(TopologyId topology, double alpha) const {
    const auto it = entries_.find({static_cast<int>(topology), alpha});
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<const CalibrationEntry*> CalibrationTable::entries() const {
    std::vector<const CalibrationEntry*> out;
    for (const auto& [key, e] : entries_) out.push_back(&e);
    return out;
}

std::string table_json(const CalibrationTable& table) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["format"] = "kgcal-calibration";
    j["version"] = 1;
    ordered_json sets = ordered_json::array();
    ordered_json entries = ordered_json::array();
    std::vector<const std::vector<std::vector<double>>*> seen;
    for (const auto* e : table.entries()) {
        const auto* ptr = e->samples.get();
        auto it = std::find(seen.begin(), seen.end(), ptr);
        if (it == seen.end()) {
            seen.push_back(ptr);
            sets.push_back(*ptr);
            it = seen.end() - 1;
        }
        ordered_json x;
        x["topology"] = to_string(e->topology);
        x["alpha"] = e->alpha;
        x["thresholds"] = e->thresholds.values;
        x["eta"] = e->eta;
        x["strategy"] = e->strategy;
        x["exponents"] = e->exponents;
        x["routing_threshold"] = e->routing_threshold;
        x["margin"] = e->margin;
        x["sample_set"] = static_cast<std::size_t>(it - seen.begin());
        x["opt_size"] = e->opt_size;
        x["valid_size"] = e->valid_size;
        x["seed"] = e->seed;
        x["feasible"] = e->feasible;
        x["valid_cardinality"] = e->valid_cardinality;
        entries.push_back(std::move(x));
    }
    j["sample_sets"] = std::move(sets);
    j["entries"] = std::move(entries);
    return j.dump(1) + "\n";
}

void write_table(const std::filesystem::path& path, const CalibrationTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write calibration table " + path.string());
    out << table_json(table);
    if (!out) throw Error("failed writing calibration table " + path.string());
}

CalibrationTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open calibration table " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("calibration table " + path.string() + ": " + e.what());
    }
    CalibrationTable table;
    try {
        if (j.at("format") != "kgcal-calibration") throw ConfigError("not a calibration table: " + path.string());
        std::vector<std::shared_ptr<const std::vector<std::vector<double>>>> sets;
        for (const auto& s : j.at("sample_sets")) {
            sets.push_back(std::make_shared<const std::vector<std::vector<double>>>(
                s.get<std::vector<std::vector<double>>>()));
        }
        for (const auto& x : j.at("entries")) {
            CalibrationEntry e;
            e.topology = parse_topology(x.at("topology").get<std::string>());
            e.alpha = x.at("alpha").get<double>();
            e.thresholds.values = x.at("thresholds").get<std::vector<double>>();
            e.eta = x.at("eta").get<double>();
            e.strategy = x.at("strategy").get<std::string>();
            e.exponents = x.at("exponents").get<std::vector<double>>();
            e.routing_threshold = x.at("routing_threshold").get<double>();
            e.margin = x.at("margin").get<double>();
            e.samples = sets.at(x.at("sample_set").get<std::size_t>());
            e.opt_size = x.at("opt_size").get<std::size_t>();
            e.valid_size = x.at("valid_size").get<std::size_t>();
            e.seed = x.at("seed").get<std::uint64_t>();
            e.feasible = x.at("feasible").get<bool>();
            e.valid_cardinality = x.at("valid_cardinality").get<double>();
            e.validate();
            table.insert(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("calibration table " + path.string() + ": " + e.what());
    } catch (const std::out_of_range&) {
        throw ConfigError("calibration table " + path.string() + ": sample_set index out of range");
    }
    return table;
}

// ---------------------------------------------------------------------------
// Calibrator

Calibrator::Calibrator(const EngineContext& ctx, TopologyId topology, std::span<const QueryInstance> d_opt,
                       std::span<const QueryInstance> d_valid, std::vector<ScalarizationStrategy> strategies,
                       CalibrationSettings settings)
    : ctx_(ctx),
      topology_(topology),
      d_opt_(d_opt),
      d_valid_(d_valid),
      strategies_(std::move(strategies)),
      settings_(settings) {
    if (d_opt_.empty()) throw CalibrationError("D_opt is empty");
    if (d_valid_.empty()) throw CalibrationError("D_valid is empty");
    if (strategies_.empty()) throw CalibrationError("no scalarization strategies given");
    ctx_.gate.validate();
    const std::size_t k = projection_count(topology);
    for (const auto& s : strategies_) {
        s.validate();
        if (s.exponents.size() != k) throw ConfigError("strategy '" + s.label + "' does not match the slot count");
    }

    collection_ = collect_scores(d_opt_, topology, ctx_, settings_.top_k);
    // The audit covers score collection; D_valid runs take the fast gate path.
    ctx_.audit = nullptr;
    auto sorted = std::make_shared<std::vector<std::vector<double>>>();
    for (const auto& s : collection_.samples) {
        quantiles_.emplace_back(s);
        const auto view = quantiles_.back().sorted();
        sorted->emplace_back(view.begin(), view.end());
    }
    sorted_samples_ = std::move(sorted);

    const auto grid = eta_grid(settings_.grid_size);
    const std::size_t n = d_opt_.size();
    curves_.assign(strategies_.size(), std::vector<RiskEstimate>(grid.size()));
    parallel_for(strategies_.size() * grid.size(), ctx_.workers, [&](std::size_t cell) {
        const std::size_t s = cell / grid.size();
        const std::size_t g = cell % grid.size();
        const auto lambda = scalarize(grid[g], strategies_[s], quantiles_);
        double loss = 0.0;
        double card = 0.0;
        for (const auto& lat : collection_.lattices) {
            const auto o = lat.replay(lambda);
            loss += 1.0 - static_cast<double>(o.hits) / static_cast<double>(lat.answer_count);
            card += static_cast<double>(o.cardinality);
        }
        auto& est = curves_[s][g];
        est.eta = grid[g];
        est.empirical = loss / static_cast<double>(n);
        est.corrected = corrected_risk(est.empirical, n);
        est.pruned_cardinality = card / static_cast<double>(n);
    });
    for (std::size_t s = 0; s < strategies_.size(); ++s) {
        for (std::size_t g = 1; g < grid.size(); ++g) {
            if (curves_[s][g].empirical < curves_[s][g - 1].empirical) {
                throw CalibrationError("empirical risk decreases along the eta grid for strategy '" +
                                       strategies_[s].label + "'");
            }
        }
    }
}

std::optional<std::size_t> Calibrator::valid_total(const ThresholdVector& thresholds, std::size_t begin,
                                                   std::size_t end, std::size_t carried, std::size_t bound) const {
    // Totals only grow, so a partial sum above the bound settles the outcome
    // whichever queries have run so far.
    std::atomic<std::size_t> total{carried};
    std::atomic<bool> over{carried > bound};
    parallel_for(end - begin, ctx_.workers, [&](std::size_t i) {
        if (over) return;
        const auto r = execute_query(d_valid_[begin + i], thresholds, ctx_);
        if (total.fetch_add(r.answers.size()) + r.answers.size() > bound) over = true;
    });
    if (over) return std::nullopt;
    return total.load();
}

CalibrationEntry Calibrator::calibrate(RiskBudget budget) const {
    budget.validate();
    CalibrationEntry entry;
    entry.topology = topology_;
    entry.alpha = budget.alpha;
    entry.routing_threshold = ctx_.gate.routing_threshold;
    entry.margin = ctx_.gate.margin;
    entry.samples = sorted_samples_;
    entry.opt_size = d_opt_.size();
    entry.valid_size = d_valid_.size();
    entry.seed = settings_.seed;
    const auto unbounded = std::numeric_limits<std::size_t>::max();
    const std::size_t n_valid = d_valid_.size();

    struct Candidate {
        std::size_t strategy;
        double eta;
        ThresholdVector lambda;
        std::size_t probe = 0;
    };
    std::vector<Candidate> candidates;
    for (std::size_t s = 0; s < strategies_.size(); ++s) {
        if (const auto pick = crc_select(curves_[s], budget, d_opt_.size())) {
            const double eta = curves_[s][*pick].eta;
            candidates.push_back({s, eta, scalarize(eta, strategies_[s], quantiles_)});
        }
    }

    // Exact search for the smallest D_valid cardinality. A short probe on the
    // head of D_valid orders the candidates, then each full evaluation stops
    // as soon as it exceeds the best total so far. The winner is the same as
    // an exhaustive scan in strategy order.
    const std::size_t probe = std::min(n_valid, std::max<std::size_t>(10, n_valid / 20));
    auto lookup = [&](const ThresholdVector& lambda) -> std::optional<std::size_t> {
        std::lock_guard lock(cache_mutex_);
        const auto it = cardinality_cache_.find(lambda.values);
        if (it == cardinality_cache_.end()) return std::nullopt;
        return it->second;
    };
    for (auto& c : candidates) {
        const auto cached = lookup(c.lambda);
        c.probe = cached ? 0 : *valid_total(c.lambda, 0, probe, 0, unbounded);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.probe < b.probe; });

    std::optional<std::size_t> winner;
    std::size_t best = unbounded;
    for (auto& c : candidates) {
        auto total = lookup(c.lambda);
        if (!total) {
            total = valid_total(c.lambda, probe, n_valid, c.probe, best);
            if (total) {
                std::lock_guard lock(cache_mutex_);
                cardinality_cache_.emplace(c.lambda.values, *total);
            }
        }
        if (!total || *total > best) continue;
        if (!winner || *total < best || c.strategy < *winner) {
            winner = c.strategy;
            best = *total;
            entry.eta = c.eta;
            entry.thresholds = c.lambda;
            entry.strategy = strategies_[c.strategy].label;
            entry.exponents = strategies_[c.strategy].exponents;
        }
    }
    if (!winner) {
        const auto uniform = uniform_strategy(projection_count(topology_));
        entry.feasible = false;
        entry.eta = 0.0;
        entry.thresholds = scalarize(0.0, uniform, quantiles_);
        entry.strategy = uniform.label;
        entry.exponents = uniform.exponents;
        best = *valid_total(entry.thresholds, 0, n_valid, 0, unbounded);
    }
    entry.valid_cardinality = static_cast<double>(best) / static_cast<double>(n_valid);
    return entry;
}

CalibrationEntry calibrate(TopologyId topology, RiskBudget budget, std::span<const QueryInstance> d_cal,
                           std::size_t opt_size, std::vector<ScalarizationStrategy> strategies,
                           const EngineContext& ctx, CalibrationSettings settings) {
    if (opt_size == 0 || opt_size >= d_cal.size()) {
        throw CalibrationError("D_cal of size " + std::to_string(d_cal.size()) + " cannot give D_opt " +
                               std::to_string(opt_size) + " and a non-empty D_valid");
    }
    const Calibrator cal(ctx, topology, d_cal.first(opt_size), d_cal.subspan(opt_size), std::move(strategies),
                         settings);
    return cal.calibrate(budget);
}

}  // namespace kgcal
