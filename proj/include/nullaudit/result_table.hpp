#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nullaudit::report {

struct Cell {
    double value = 0.0;  // NaN renders as NA
    std::optional<double> lo;
    std::optional<double> hi;
    std::optional<std::string> text;  // label cells
};

// How a column's interval is formed.
enum class Interval {
    None,
    NormalMean,     // mean +- 1.96 sd / sqrt(n)
    WaldRate,       // p +- 1.96 sqrt(p(1-p)/n)
    OrderStatistic, // distribution-free interval for a quantile
    Spread          // empirical 2.5% / 97.5% quantiles of the sample
};

struct Column {
    std::string name;
    Interval interval = Interval::None;
};

struct Row {
    std::string key;
    std::vector<Cell> cells;
    bool failed = false;
    std::string error;
};

struct ResultTable {
    std::string name;
    std::string title;
    std::vector<Column> columns;
    std::vector<Row> rows;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t column(const std::string& name) const;
    const Row& row(const std::string& key) const;
    const Cell& at(const std::string& key, const std::string& col) const;
    double value(const std::string& key, const std::string& col) const;
    bool any_failed() const;
    // Appends a failed row with NA cells.
    void add_failed(const std::string& key, const std::string& error);
};

// Cell builders.
Cell label(std::string s);
Cell number(double v);
Cell na();
Cell mean_cell(const std::vector<double>& x);
Cell rate_cell(std::size_t hits, std::size_t n, double scale = 100.0);
Cell median_cell(std::vector<double> x);
Cell mean_spread_cell(const std::vector<double>& x);
// Distribution-free ~95% order-statistic interval for the q-quantile.
std::pair<double, double> quantile_interval(std::vector<double> x, double q);

std::string interval_name(Interval i);

nlohmann::json to_json(const ResultTable& t);
ResultTable table_from_json(const nlohmann::json& j);
// Tidy CSV: one column per table column, plus _lo/_hi for columns with intervals.
void write_csv(const ResultTable& t, const std::filesystem::path& file);
std::string to_text(const ResultTable& t);

}  // namespace nullaudit::report
