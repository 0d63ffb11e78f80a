#pragma once

#include <string>
#include <vector>

#include "simalloc/config.hpp"
#include "simalloc/energy.hpp"
#include "simalloc/engine.hpp"

namespace simalloc {

/// First column of every metrics row; bumped whenever columns change.
inline constexpr const char* kMetricsSchema = "simalloc-metrics-v1";
inline constexpr const char* kCompareSchema = "simalloc-compare-v1";

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a column; throws Error when absent.
    std::size_t column(const std::string& name) const;
    const std::string& at(std::size_t row, const std::string& name) const;
};

/// Six significant digits, printf %.6g.
std::string format_float(double v);

const std::vector<std::string>& metrics_header();
std::vector<std::string> metrics_row(const std::string& label, const Metrics& m,
                                     const PowerModel& power);

std::string to_csv(const CsvTable& table);
/// Strict reader for the files written by to_csv (no quoting).
CsvTable parse_csv(const std::string& text);
CsvTable load_csv(const std::string& path);
void write_file(const std::string& path, const std::string& content);

const std::vector<std::string>& compare_header();
/// Relative row of run `b` against run `a`, both metrics rows. Throws Error
/// when their trace hashes differ.
std::vector<std::string> compare_row(const CsvTable& a, std::size_t row_a, const CsvTable& b,
                                     std::size_t row_b);

std::string markdown_report(const std::string& title, const Metrics& m, const RunConfig& config);
std::string markdown_compare(const CsvTable& a, const CsvTable& b, const CsvTable& cmp);
std::string markdown_table(const CsvTable& table);

}  // namespace simalloc
