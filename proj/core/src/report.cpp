#include "kgcal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

namespace kgcal {

namespace {

using GroupKey = std::tuple<std::string, std::string, double, double>;  // strategy, topology, incompleteness, param

std::string fixed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

bool calibrated_family(const std::string& s) { return s == "calibrated" || s == "union_bound"; }

std::string param_label(const std::string& strategy, double param) {
    if (calibrated_family(strategy)) return "alpha=" + fixed(param, 2) + " (target " + fixed(1.0 - param, 2) + ")";
    if (strategy == "retrieval") return "-";
    return "theta=" + fixed(param, 2);
}

struct Group {
    MetricsRecord metrics;
    bool has_stderr = false;
};

std::map<GroupKey, Group> group_rows(std::span<const ResultRow> rows) {
    std::map<GroupKey, std::vector<ResultRow>> per_query;
    std::map<GroupKey, ResultRow> aggregates;
    for (const auto& r : rows) {
        GroupKey key{r.strategy, r.topology, r.incompleteness, r.param};
        if (r.aggregate()) {
            aggregates.emplace(key, r);
        } else {
            per_query[key].push_back(r);
        }
    }
    std::map<GroupKey, Group> out;
    for (const auto& [key, list] : per_query) out[key] = {summarize(list), true};
    for (const auto& [key, a] : aggregates) {
        if (out.contains(key)) continue;
        Group g;
        g.metrics.strategy = a.strategy;
        g.metrics.topology = a.topology;
        g.metrics.incompleteness = a.incompleteness;
        g.metrics.param = a.param;
        g.metrics.recall = a.recall;
        g.metrics.recall_stderr = std::nan("");
        g.metrics.precision = a.precision;
        g.metrics.abstention_rate = a.abstained;
        g.metrics.mean_neural_calls = a.neural_calls;
        g.metrics.hybrid_hop_fraction = a.total_hops > 0 ? a.hybrid_hops / a.total_hops : 0.0;
        g.metrics.mean_cardinality = a.cardinality;
        out[key] = g;
    }
    return out;
}

}  // namespace

ComparisonReport compare_report(std::span<const ResultRow> rows, double recall_floor) {
    ComparisonReport rep;
    const auto groups = group_rows(rows);

    rep.validity.title = "Validity: empirical recall vs target (band = recall +/- 1.96 stderr)";
    rep.validity.columns = {"strategy", "topology", "incompleteness", "alpha", "target", "recall", "stderr",
                            "band_low", "band_high", "deviation", "cardinality"};
    for (const auto& [key, g] : groups) {
        const auto& m = g.metrics;
        if (!calibrated_family(m.strategy)) continue;
        const double target = 1.0 - m.param;
        const double se = m.recall_stderr;
        rep.validity.rows.push_back({m.strategy, m.topology, fixed(m.incompleteness, 2), fixed(m.param, 2),
                                     fixed(target, 2), fixed(m.recall), fixed(se, 4), fixed(m.recall - 1.96 * se),
                                     fixed(m.recall + 1.96 * se), fixed(m.recall - target),
                                     fixed(m.mean_cardinality, 2)});
    }

    rep.precision.title = "Maximum precision subject to empirical recall >= " + fixed(recall_floor, 2);
    rep.precision.columns = {"incompleteness", "topology", "strategy", "best_param", "recall", "precision"};
    {
        std::map<std::tuple<double, std::string, std::string>, const MetricsRecord*> best;
        std::map<std::tuple<double, std::string, std::string>, bool> seen;
        for (const auto& [key, g] : groups) {
            const auto& m = g.metrics;
            const std::tuple k{m.incompleteness, m.topology, m.strategy};
            seen[k] = true;
            if (m.recall < recall_floor) continue;
            auto& slot = best[k];
            if (!slot || m.precision > slot->precision) slot = &m;
        }
        for (const auto& [k, present] : seen) {
            const auto it = best.find(k);
            const auto& [inc, topo, strategy] = k;
            if (it == best.end()) {
                rep.precision.rows.push_back({fixed(inc, 2), topo, strategy, "fails floor", "-", "-"});
            } else {
                const auto* m = it->second;
                rep.precision.rows.push_back({fixed(inc, 2), topo, strategy, param_label(strategy, m->param),
                                              fixed(m->recall), fixed(m->precision)});
            }
        }
    }

    rep.abstention.title = "Abstention rate by incompleteness (mean over topologies)";
    rep.abstention.columns = {"strategy", "param", "incompleteness", "abstention", "queries"};
    {
        std::map<std::tuple<std::string, double, double>, std::pair<double, std::size_t>> acc;
        for (const auto& [key, g] : groups) {
            const auto& m = g.metrics;
            auto& a = acc[{m.strategy, m.param, m.incompleteness}];
            const auto n = std::max<std::size_t>(m.query_count, 1);
            a.first += m.abstention_rate * static_cast<double>(n);
            a.second += n;
        }
        for (const auto& [k, a] : acc) {
            const auto& [strategy, param, inc] = k;
            rep.abstention.rows.push_back({strategy, param_label(strategy, param), fixed(inc, 2),
                                           fixed(a.first / static_cast<double>(a.second)), std::to_string(a.second)});
        }
    }

    rep.invocations.title = "Inference invocations (hybrid hops as a fraction of total hops; logical calls per query)";
    rep.invocations.columns = {"strategy", "topology", "incompleteness", "param", "hybrid_fraction", "mean_calls"};
    for (const auto& [key, g] : groups) {
        const auto& m = g.metrics;
        if (m.strategy == "retrieval") continue;
        rep.invocations.rows.push_back({m.strategy, m.topology, fixed(m.incompleteness, 2),
                                        param_label(m.strategy, m.param), fixed(m.hybrid_hop_fraction),
                                        fixed(m.mean_neural_calls, 1)});
    }
    return rep;
}

std::string render(const ReportTable& table) {
    std::vector<std::size_t> width(table.columns.size());
    for (std::size_t c = 0; c < table.columns.size(); ++c) width[c] = table.columns[c].size();
    for (const auto& r : table.rows) {
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream out;
    out << table.title << '\n';
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) out << "  ";
            out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
        }
        out << '\n';
    };
    line(table.columns);
    if (table.rows.empty()) out << "(no rows)\n";
    for (const auto& r : table.rows) line(r);
    return out.str();
}

std::string render(const ComparisonReport& report) {
    return render(report.validity) + "\n" + render(report.precision) + "\n" + render(report.abstention) + "\n" +
           render(report.invocations);
}

}  // namespace kgcal
