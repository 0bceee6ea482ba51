#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kgcal/exec.hpp"
#include "kgcal/outcome.hpp"

namespace kgcal {

inline constexpr const char* kAggregateId = "ALL";

// One results-CSV line. Per-query rows carry 0/1 in `abstained`; aggregate
// rows (query_id "ALL") carry means, except hybrid_hops and total_hops which
// are sums so the invocation fraction is their ratio.
struct ResultRow {
    std::string strategy;
    std::string topology;
    double incompleteness = 0.0;
    double param = 0.0;
    std::string query_id;
    double recall = 0.0;
    double precision = 0.0;
    double abstained = 0.0;
    double cardinality = 0.0;
    double neural_calls = 0.0;
    double hybrid_hops = 0.0;
    double total_hops = 0.0;

    bool aggregate() const { return query_id == kAggregateId; }
    bool operator==(const ResultRow&) const = default;
};

ResultRow query_row(std::string strategy, std::string topology, double incompleteness, double param,
                    std::size_t query_index, const QueryOutcome& outcome, const ExecutionTrace& trace);

// Aggregate row over per-query rows sharing strategy/topology/incompleteness/param.
ResultRow aggregate_rows(std::span<const ResultRow> rows);

struct MetricsRecord {
    std::string strategy;
    std::string topology;
    double incompleteness = 0.0;
    double param = 0.0;
    double recall = 0.0;
    double recall_stderr = 0.0;  // from the per-query loss sample
    double precision = 0.0;
    double abstention_rate = 0.0;
    double mean_neural_calls = 0.0;
    double hybrid_hop_fraction = 0.0;
    double mean_cardinality = 0.0;
    std::size_t query_count = 0;
    std::uint64_t seed = 0;
};

MetricsRecord summarize(std::span<const ResultRow> query_rows, std::uint64_t seed = 0);

// Sample standard deviation / sqrt(n); zero for fewer than two values.
double standard_error(std::span<const double> values);

// Shortest round-trip decimal form.
std::string format_number(double value);

struct CsvHeader {
    std::vector<std::string> comments;  // lines written as "# ..."
};

void write_results(std::ostream& out, std::span<const ResultRow> rows, const CsvHeader& header = {});
void write_results(const std::filesystem::path& path, std::span<const ResultRow> rows, const CsvHeader& header = {});
std::vector<ResultRow> read_results(std::istream& in);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

}  // namespace kgcal
