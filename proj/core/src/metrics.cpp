#include "kgcal/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kgcal/error.hpp"

namespace kgcal {

namespace {

constexpr const char* kColumns =
    "strategy,topology,incompleteness,param,query_id,recall,precision,abstained,cardinality,neural_calls,"
    "hybrid_hops,total_hops";

double mean_of(std::span<const ResultRow> rows, double ResultRow::*field) {
    double total = 0.0;
    for (const auto& r : rows) total += r.*field;
    return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

double parse_number(const std::string& field, std::size_t line) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError("bad number '" + field + "' in results", line);
    return v;
}

}  // namespace

ResultRow query_row(std::string strategy, std::string topology, double incompleteness, double param,
                    std::size_t query_index, const QueryOutcome& outcome, const ExecutionTrace& trace) {
    ResultRow r;
    r.strategy = std::move(strategy);
    r.topology = std::move(topology);
    r.incompleteness = incompleteness;
    r.param = param;
    r.query_id = std::to_string(query_index);
    r.recall = outcome.recall();
    r.precision = outcome.precision();
    r.abstained = outcome.abstained() ? 1.0 : 0.0;
    r.cardinality = static_cast<double>(outcome.answer_size);
    r.neural_calls = static_cast<double>(trace.invocations());
    r.hybrid_hops = static_cast<double>(trace.hybrid_hops());
    r.total_hops = static_cast<double>(trace.slots.size());
    return r;
}

ResultRow aggregate_rows(std::span<const ResultRow> rows) {
    if (rows.empty()) throw Error("cannot aggregate an empty row set");
    ResultRow a;
    a.strategy = rows.front().strategy;
    a.topology = rows.front().topology;
    a.incompleteness = rows.front().incompleteness;
    a.param = rows.front().param;
    a.query_id = kAggregateId;
    a.recall = mean_of(rows, &ResultRow::recall);
    a.precision = mean_of(rows, &ResultRow::precision);
    a.abstained = mean_of(rows, &ResultRow::abstained);
    a.cardinality = mean_of(rows, &ResultRow::cardinality);
    a.neural_calls = mean_of(rows, &ResultRow::neural_calls);
    for (const auto& r : rows) {
        a.hybrid_hops += r.hybrid_hops;
        a.total_hops += r.total_hops;
    }
    return a;
}

double standard_error(std::span<const double> values) {
    const auto n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

MetricsRecord summarize(std::span<const ResultRow> query_rows, std::uint64_t seed) {
    const auto agg = aggregate_rows(query_rows);
    MetricsRecord m;
    m.strategy = agg.strategy;
    m.topology = agg.topology;
    m.incompleteness = agg.incompleteness;
    m.param = agg.param;
    m.recall = agg.recall;
    std::vector<double> losses;
    losses.reserve(query_rows.size());
    for (const auto& r : query_rows) losses.push_back(1.0 - r.recall);
    m.recall_stderr = standard_error(losses);
    m.precision = agg.precision;
    m.abstention_rate = agg.abstained;
    m.mean_neural_calls = agg.neural_calls;
    m.hybrid_hop_fraction = agg.total_hops > 0 ? agg.hybrid_hops / agg.total_hops : 0.0;
    m.mean_cardinality = agg.cardinality;
    m.query_count = query_rows.size();
    m.seed = seed;
    return m;
}

std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

void write_results(std::ostream& out, std::span<const ResultRow> rows, const CsvHeader& header) {
    for (const auto& c : header.comments) out << "# " << c << '\n';
    out << kColumns << '\n';
    for (const auto& r : rows) {
        out << r.strategy << ',' << r.topology << ',' << format_number(r.incompleteness) << ','
            << format_number(r.param) << ',' << r.query_id << ',' << format_number(r.recall) << ','
            << format_number(r.precision) << ',' << format_number(r.abstained) << ','
            << format_number(r.cardinality) << ',' << format_number(r.neural_calls) << ','
            << format_number(r.hybrid_hops) << ',' << format_number(r.total_hops) << '\n';
    }
}

void write_results(const std::filesystem::path& path, std::span<const ResultRow> rows, const CsvHeader& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write results " + path.string());
    write_results(out, rows, header);
    if (!out) throw Error("failed writing results " + path.string());
}

std::vector<ResultRow> read_results(std::istream& in) {
    std::vector<ResultRow> rows;
    std::string line;
    std::size_t number = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!saw_header) {
            if (line != kColumns) throw ParseError("unexpected results header", number);
            saw_header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 12) throw ParseError("results row needs 12 fields", number);
        ResultRow r;
        r.strategy = f[0];
        r.topology = f[1];
        r.incompleteness = parse_number(f[2], number);
        r.param = parse_number(f[3], number);
        r.query_id = f[4];
        r.recall = parse_number(f[5], number);
        r.precision = parse_number(f[6], number);
        r.abstained = parse_number(f[7], number);
        r.cardinality = parse_number(f[8], number);
        r.neural_calls = parse_number(f[9], number);
        r.hybrid_hops = parse_number(f[10], number);
        r.total_hops = parse_number(f[11], number);
        rows.push_back(std::move(r));
    }
    if (!saw_header) throw ConfigError("results file has no header");
    return rows;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open results " + path.string());
    return read_results(in);
}

}  // namespace kgcal
