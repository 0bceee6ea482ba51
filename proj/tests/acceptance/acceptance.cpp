// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kgcal/baselines.hpp"
#include "kgcal/calib.hpp"
#include "kgcal/config.hpp"
#include "kgcal/experiment.hpp"
#include "kgcal/metrics.hpp"
#include "kgcal/outcome.hpp"
#include "kgcal/rng.hpp"

using namespace kgcal;

namespace {

constexpr double kValidityTolerance = 0.05;
constexpr double kHybridFractionCap = 0.05;
constexpr double kPrecisionSlack = 0.05;
constexpr double kRecallFloor = 0.60;
const std::vector<double> kBudgets{0.1, 0.2, 0.3, 0.4};
const std::vector<double> kWeakBudgets{0.2, 0.3};
const std::vector<std::string> kTopologies{"3p", "2u", "2ip"};

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void note(const std::string& line) {
    std::printf("  %s\n", line.c_str());
    std::fflush(stdout);
}

std::string num(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

class Rows {
public:
    explicit Rows(const std::vector<ResultRow>& rows) {
        for (const auto& r : rows) {
            if (r.aggregate()) index_[{r.strategy, r.topology, r.incompleteness, r.param}] = r;
        }
    }

    const ResultRow& at(const std::string& strategy, const std::string& topology, double inc, double param) const {
        return index_.at({strategy, topology, inc, param});
    }

    // Highest aggregate precision among grid points meeting the recall floor.
    std::optional<double> best_precision(const std::string& strategy, const std::string& topology, double inc) const {
        std::optional<double> best;
        for (const auto& [key, r] : index_) {
            if (std::get<0>(key) != strategy || std::get<1>(key) != topology || std::get<2>(key) != inc) continue;
            if (r.recall >= kRecallFloor && (!best || r.precision > *best)) best = r.precision;
        }
        return best;
    }

private:
    std::map<std::tuple<std::string, std::string, double, double>, ResultRow> index_;
};

ExperimentConfig base_config() {
    ExperimentConfig c;
    c.seed = 1;
    c.workers = 0;
    return c;
}

ExperimentOutput timed_run(const std::string& label, const ExperimentConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = run_experiment(config);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    note(label + ": " + std::to_string(out.rows.size()) + " rows in " + num(s, 1) + " s");
    for (const auto& w : out.warnings) note("warning: " + w);
    return out;
}

std::string csv_bytes(const ExperimentOutput& out) {
    std::ostringstream s;
    write_results(s, out.rows, {{out.seeds}});
    return s.str();
}

std::string tables_bytes(const ExperimentOutput& out) {
    std::string s;
    for (const auto& [inc, table] : out.tables) s += format_number(inc) + "\n" + table_json(table);
    return s;
}

void validity(const Rows& strong) {
    double worst = 1.0;
    std::string where;
    bool ok = true;
    for (const auto& t : kTopologies) {
        for (double a : kBudgets) {
            const auto& r = strong.at("calibrated", t, 0.2, a);
            const double dev = r.recall - (1.0 - a);
            note("validity " + t + " alpha=" + num(a, 1) + ": recall " + num(r.recall) + " target " + num(1 - a, 1) +
                 " deviation " + num(dev));
            ok = ok && dev >= -kValidityTolerance;
            if (dev < worst) {
                worst = dev;
                where = t + " alpha=" + num(a, 1);
            }
        }
    }
    report(1, "validity", ok,
           "min deviation " + num(worst) + " at " + where + ", tolerance -" + num(kValidityTolerance, 2));
}

void nestedness(const ExperimentConfig& config) {
    Environment env(config);
    env.set_incompleteness(0.2);
    const auto ctx = env.context();
    Rng rng(derive_seed(config.seed, "acceptance:nestedness"));
    std::size_t held = 0;
    std::size_t draws = 0;
    for (const auto topo : {TopologyId::ThreeP, TopologyId::TwoU, TopologyId::TwoIp}) {
        const auto splits = make_splits(env, config, topo);
        const auto collection = collect_scores(std::span(splits.opt).first(200), topo, ctx, config.scorer.top_k);
        std::vector<EmpiricalQuantile> qs;
        for (const auto& s : collection.samples) qs.push_back(fit_quantile(s));
        const auto strategies = config.strategies_for(topo);
        const auto grid = eta_grid(config.grid_size);
        for (int i = 0; i < 100; ++i) {
            const auto& q = splits.eval[rng.below(splits.eval.size())];
            const auto& s = strategies[rng.below(strategies.size())];
            auto a = rng.below(grid.size() - 1);
            auto b = a + 1 + rng.below(grid.size() - 1 - a);
            const auto loose = execute_query(q, scalarize(grid[a], s, qs), ctx);
            const auto tight = execute_query(q, scalarize(grid[b], s, qs), ctx);
            held += std::includes(loose.answers.begin(), loose.answers.end(), tight.answers.begin(),
                                  tight.answers.end());
            ++draws;
        }
    }
    report(2, "nestedness", held == draws && draws == 300,
           std::to_string(held) + "/" + std::to_string(draws) + " draws nested");
}

// Scalar risk control over the pooled sample, written independently of the
// library's calibrator: order statistic, brute-force per-query miss rate
// from unified scores, finite-sample correction, largest qualifying eta.
struct ScalarChoice {
    std::size_t index = 0;
    double lambda = 0.0;
    std::vector<double> corrected;
};

ScalarChoice scalar_oracle(std::vector<double> sample, std::span<const QueryInstance> d_opt,
                           const KnowledgeGraph& graph, const ScoreFunction& scorer, const GateConfig& gate,
                           double alpha, std::size_t grid_size) {
    std::sort(sample.begin(), sample.end());
    const double m = static_cast<double>(sample.size());
    auto quantile = [&](double p) {
        if (p <= 0.0) return sample.front();
        const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p * m - 1e-9)));
        return sample[std::min(rank, sample.size()) - 1];
    };
    const double n = static_cast<double>(d_opt.size());
    ScalarChoice out;
    out.lambda = quantile(0.0);
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double lambda = quantile(static_cast<double>(i) / static_cast<double>(grid_size - 1));
        double loss = 0.0;
        for (const auto& q : d_opt) {
            std::size_t hit = 0;
            for (const auto t : q.truth.final) {
                const Triple x{q.anchors[0], q.relations[0], t};
                hit += unified_score(x, graph.contains(x, View::Observed), scorer, gate).value >= lambda;
            }
            loss += 1.0 - static_cast<double>(hit) / static_cast<double>(q.truth.final.size());
        }
        const double corrected = n / (n + 1.0) * (loss / n) + 1.0 / (n + 1.0);
        out.corrected.push_back(corrected);
        if (corrected <= alpha) {
            out.index = i;
            out.lambda = lambda;
        }
    }
    return out;
}

void scalar_reduction() {
    int agree = 0;
    std::string detail;
    for (int trial = 0; trial < 20; ++trial) {
        ExperimentConfig c;
        c.seed = 1000 + static_cast<std::uint64_t>(trial);
        c.graph.entities = 800;
        c.graph.relations = 8;
        c.graph.triples = 10000;
        c.topologies = {TopologyId::OneP};
        c.splits = {300, 100, 1};
        Environment env(c);
        env.set_incompleteness(0.2);
        const auto ctx = env.context();
        const auto splits = make_splits(env, c, TopologyId::OneP);
        const double alpha = kBudgets[static_cast<std::size_t>(trial) % kBudgets.size()];
        Calibrator cal(ctx, TopologyId::OneP, splits.opt, splits.valid, {uniform_strategy(1)},
                       {c.grid_size, c.scorer.top_k, c.seed});
        const auto entry = cal.calibrate({alpha});
        const auto oracle = scalar_oracle(cal.collection().samples[0], splits.opt, env.graph(), env.scorer(), ctx.gate,
                                          alpha, c.grid_size);
        const bool same = entry.thresholds[0] == oracle.lambda;
        const bool bound = oracle.corrected[oracle.index] <= alpha;
        const bool edge = oracle.index + 1 == c.grid_size || oracle.corrected[oracle.index + 1] > alpha;
        agree += same && bound && edge && entry.feasible;
        if (!(same && bound && edge)) {
            note("trial " + std::to_string(trial) + ": library " + format_number(entry.thresholds[0]) + " oracle " +
                 format_number(oracle.lambda));
        }
    }
    report(3, "scalar CRC reduction", agree == 20, std::to_string(agree) + "/20 trials agree");
}

void union_bound(const Rows& strong) {
    int wins = 0;
    for (double a : kBudgets) {
        const auto& ub = strong.at("union_bound", "3p", 0.2, a);
        const auto& cr = strong.at("calibrated", "3p", 0.2, a);
        const bool w = ub.recall >= cr.recall && ub.cardinality >= cr.cardinality;
        note("3p alpha=" + num(a, 1) + ": union bound recall " + num(ub.recall) + " card " + num(ub.cardinality, 1) +
             " vs calibrated " + num(cr.recall) + " card " + num(cr.cardinality, 1));
        wins += w;
    }
    report(4, "union-bound pessimism", wins >= 3, std::to_string(wins) + "/4 budgets (need 3)");
}

void gate_efficiency(const Rows& five, const ExperimentOutput& out5, const ExperimentOutput& out20) {
    const auto& lo = five.at("calibrated", "3p", 0.05, 0.4);
    const auto& hi = five.at("calibrated", "3p", 0.05, 0.1);
    const double f_lo = lo.hybrid_hops / lo.total_hops;
    const double f_hi = hi.hybrid_hops / hi.total_hops;
    const auto calls = out5.retrieval_slot_invocations + out20.retrieval_slot_invocations;
    report(5, "gate efficiency", f_lo <= kHybridFractionCap && f_hi >= f_lo && calls == 0,
           "hybrid-hop fraction " + num(f_lo) + " at alpha=0.4 (cap " + num(kHybridFractionCap, 2) + "), " +
               num(f_hi) + " at alpha=0.1; retrieval-only scorer calls " + std::to_string(calls));
}

void score_partition(const ExperimentConfig& config, const ExperimentOutput& out) {
    // Calibration audits every score it collects; runtime execution is
    // audited separately on part of D_eval through the per-edge path.
    Environment env(config);
    env.set_incompleteness(0.2);
    ScoreAudit audit;
    const auto ctx = env.context(&audit);
    const auto& table = out.tables.front().second;
    for (const auto topo : {TopologyId::ThreeP, TopologyId::TwoU, TopologyId::TwoIp}) {
        const auto splits = make_splits(env, config, topo);
        for (double a : kBudgets) {
            const auto* entry = table.find(topo, a);
            for (std::size_t i = 0; i < 25; ++i) execute_query(splits.eval[i], entry->thresholds, ctx);
        }
    }
    const std::uint64_t total = out.scores_retrieved + out.scores_inferred + audit.total();
    const std::uint64_t bad = out.score_violations + audit.violations;
    note("calibration scores: " + std::to_string(out.scores_retrieved) + " retrieved, " +
         std::to_string(out.scores_inferred) + " inferred; runtime scores audited: " + std::to_string(audit.total()));
    report(6, "score partition", total >= 100000 && bad == 0,
           std::to_string(total) + " scores, " + std::to_string(bad) + " violations");
}

void oracle_equivalence(const ExperimentConfig& config) {
    Environment env(config);
    env.set_incompleteness(0.2);
    const auto ctx = env.context();
    std::size_t exact = 0, subset = 0, total = 0;
    double min_precision = 1.0;
    for (const auto topo : {TopologyId::ThreeP, TopologyId::TwoU, TopologyId::TwoIp}) {
        const auto w = generate_workload(env.graph(), topo, 100, config.frontier_cap,
                                         derive_seed(config.seed, "acceptance:oracle"));
        for (const auto& q : w) {
            const auto nodes = evaluate_exact(q.dag, {&env.graph(), View::Complete});
            bool same = nodes.back() == q.truth.final;
            for (std::size_t j = 0; j < q.dag.k(); ++j) same = same && nodes[q.dag.slot_nodes()[j]] == q.truth.per_projection[j];
            exact += same;
            const auto r = run_baseline(BaselineSpec::retrieval(), q, ctx);
            const auto o = compare_answers(r.answers, q.truth.final);
            subset += o.hits == r.answers.size();
            if (!r.answers.empty()) min_precision = std::min(min_precision, o.precision());
            ++total;
        }
    }
    report(7, "oracle equivalence", exact == total && subset == total && min_precision == 1.0,
           std::to_string(exact) + "/" + std::to_string(total) + " exact over Complete, " + std::to_string(subset) +
               "/" + std::to_string(total) + " subsets over Observed, min retrieval precision " + num(min_precision));
}

void determinism(const ExperimentOutput& a, const ExperimentOutput& b) {
    const bool csv = csv_bytes(a) == csv_bytes(b);
    const bool tables = tables_bytes(a) == tables_bytes(b);
    report(8, "determinism", csv && tables,
           std::string("results CSV ") + (csv ? "identical" : "differs") + ", calibration tables " +
               (tables ? "identical" : "differ"));
}

void predictor_swap(const Rows& strong, const Rows& weak) {
    bool valid = true;
    double worst = 1.0;
    for (const auto& t : kTopologies) {
        for (double a : kWeakBudgets) {
            const double dev = weak.at("calibrated", t, 0.2, a).recall - (1.0 - a);
            worst = std::min(worst, dev);
            valid = valid && dev >= -kValidityTolerance;
        }
    }
    bool lower = true;
    std::string prec;
    for (double a : kWeakBudgets) {
        const double w = weak.at("calibrated", "3p", 0.2, a).precision;
        const double s = strong.at("calibrated", "3p", 0.2, a).precision;
        lower = lower && w < s;
        prec += " alpha=" + num(a, 1) + " " + num(w) + "<" + num(s);
    }
    report(9, "predictor swap", valid && lower,
           "weak min deviation " + num(worst) + "; 3p precision weak<strong:" + prec);
}

void static_baselines(const Rows& strong) {
    auto show = [](const std::optional<double>& v) { return v ? num(*v) : std::string("fails floor"); };
    const auto r3p = strong.best_precision("retrieval", "3p", 0.2);
    const auto r2ip = strong.best_precision("retrieval", "2ip", 0.2);
    const auto r2u = strong.best_precision("retrieval", "2u", 0.2);
    note("retrieval at recall floor: 3p " + show(r3p) + ", 2u " + show(r2u) + ", 2ip " + show(r2ip));
    int wins = 0;
    for (const auto& t : kTopologies) {
        const auto c = strong.best_precision("calibrated", t, 0.2);
        const auto h = strong.best_precision("static_hybrid", t, 0.2);
        note(t + ": best calibrated " + show(c) + ", best static hybrid " + show(h));
        wins += c.has_value() && (!h.has_value() || *c >= *h - kPrecisionSlack);
    }
    const bool retrieval_ok = !r3p && !r2ip && r2u;
    report(10, "static-baseline comparison", retrieval_ok && wins >= 2,
           std::string("retrieval floor pattern ") + (retrieval_ok ? "as expected" : "unexpected") + ", calibrated " +
               "within " + num(kPrecisionSlack, 2) + " or better on " + std::to_string(wins) + "/3 (need 2)");
}

}  // namespace

int main() {
    try {
        auto strong = base_config();
        strong.incompleteness = {0.2};
        auto five = base_config();
        five.incompleteness = {0.05};
        five.topologies = {TopologyId::ThreeP};
        auto weak = strong;
        weak.scorer.preset = ScorerPreset::Weak;
        weak.risk_budgets = kWeakBudgets;

        const auto out20 = timed_run("strong scorer, 20% missing", strong);
        const auto out5 = timed_run("strong scorer, 5% missing, 3p", five);
        const auto out5b = timed_run("strong scorer, 5% missing, 3p (repeat)", five);
        const auto outw = timed_run("weak scorer, 20% missing", weak);
        const Rows s20(out20.rows), s5(out5.rows), w20(outw.rows);

        validity(s20);
        nestedness(strong);
        scalar_reduction();
        union_bound(s20);
        gate_efficiency(s5, out5, out20);
        score_partition(strong, out20);
        oracle_equivalence(strong);
        determinism(out5, out5b);
        predictor_swap(s20, w20);
        static_baselines(s20);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance harness aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
