#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgcal/metrics.hpp"

namespace kgcal {

struct ReportTable {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

struct ComparisonReport {
    ReportTable validity;       // recall vs target with 1.96-stderr bands
    ReportTable precision;      // best precision subject to the recall floor
    ReportTable abstention;     // abstention rate by incompleteness
    ReportTable invocations;    // hybrid-hop fraction and logical scorer calls
};

inline constexpr double kRecallFloor = 0.60;

// Builds all four tables from per-query rows (aggregate rows are recomputed,
// not trusted). Groups with no per-query rows fall back to their aggregate.
ComparisonReport compare_report(std::span<const ResultRow> rows, double recall_floor = kRecallFloor);

std::string render(const ReportTable& table);
std::string render(const ComparisonReport& report);

}  // namespace kgcal
