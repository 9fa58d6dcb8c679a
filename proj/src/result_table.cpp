#include "nullaudit/result_table.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "nullaudit/errors.hpp"
#include "nullaudit/stats.hpp"

namespace nullaudit::report {

namespace {

constexpr double kZ975 = 1.959963984540054;

std::string fmt_num(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{:.10g}", v);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

nlohmann::json num_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double json_num(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

std::size_t ResultTable::column(const std::string& n) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == n) return i;
    }
    throw ContractViolation(fmt::format("table '{}' has no column '{}'", name, n));
}

const Row& ResultTable::row(const std::string& key) const {
    for (const auto& r : rows) {
        if (r.key == key) return r;
    }
    throw ContractViolation(fmt::format("table '{}' has no row '{}'", name, key));
}

const Cell& ResultTable::at(const std::string& key, const std::string& col) const {
    const auto& r = row(key);
    const auto c = column(col);
    if (c >= r.cells.size()) throw ContractViolation(fmt::format("row '{}' is short", key));
    return r.cells[c];
}

double ResultTable::value(const std::string& key, const std::string& col) const { return at(key, col).value; }

bool ResultTable::any_failed() const {
    return std::any_of(rows.begin(), rows.end(), [](const Row& r) { return r.failed; });
}

void ResultTable::add_failed(const std::string& key, const std::string& error) {
    Row r;
    r.key = key;
    r.failed = true;
    r.error = error;
    r.cells.assign(columns.size(), na());
    if (!r.cells.empty()) r.cells[0] = label(key);
    rows.push_back(std::move(r));
}

Cell label(std::string s) {
    Cell c;
    c.value = std::nan("");
    c.text = std::move(s);
    return c;
}

Cell number(double v) {
    Cell c;
    c.value = v;
    return c;
}

Cell na() { return number(std::nan("")); }

Cell mean_cell(const std::vector<double>& x) {
    Cell c;
    c.value = stats::mean(x);
    if (x.size() >= 2) {
        const double half = kZ975 * stats::sd(x) / std::sqrt(static_cast<double>(x.size()));
        c.lo = c.value - half;
        c.hi = c.value + half;
    }
    return c;
}

Cell rate_cell(std::size_t hits, std::size_t n, double scale) {
    if (n == 0) return na();
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    const double half = kZ975 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    Cell c;
    c.value = scale * p;
    c.lo = scale * (p - half);
    c.hi = scale * (p + half);
    return c;
}

std::pair<double, double> quantile_interval(std::vector<double> x, double q) {
    if (x.empty()) return {std::nan(""), std::nan("")};
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    const double half = kZ975 * std::sqrt(n * q * (1.0 - q));
    const auto clampi = [&](double v) {
        return static_cast<std::size_t>(std::clamp(v, 0.0, n - 1.0));
    };
    return {x[clampi(std::floor(n * q - half) - 1.0)], x[clampi(std::ceil(n * q + half) - 1.0)]};
}

Cell median_cell(std::vector<double> x) {
    if (x.empty()) return na();
    Cell c;
    c.value = stats::median(x);
    const auto [lo, hi] = quantile_interval(std::move(x), 0.5);
    c.lo = lo;
    c.hi = hi;
    return c;
}

Cell mean_spread_cell(const std::vector<double>& x) {
    if (x.empty()) return na();
    std::vector<double> s = x;
    std::sort(s.begin(), s.end());
    Cell c;
    c.value = stats::mean(x);
    c.lo = stats::quantile_type1_sorted(s, 0.025);
    c.hi = stats::quantile_type1_sorted(s, 0.975);
    return c;
}

std::string interval_name(Interval i) {
    switch (i) {
        case Interval::None: return "none";
        case Interval::NormalMean: return "normal-mean";
        case Interval::WaldRate: return "wald-rate";
        case Interval::OrderStatistic: return "order-statistic";
        case Interval::Spread: return "empirical-2.5-97.5";
    }
    return "none";
}

namespace {
Interval interval_from_name(const std::string& s) {
    for (auto i : {Interval::None, Interval::NormalMean, Interval::WaldRate, Interval::OrderStatistic,
                   Interval::Spread}) {
        if (interval_name(i) == s) return i;
    }
    throw ContractViolation(fmt::format("unknown interval kind '{}'", s));
}
}  // namespace

nlohmann::json to_json(const ResultTable& t) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"interval", interval_name(c.interval)}});
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : r.cells) {
            nlohmann::json cj;
            if (c.text) cj["text"] = *c.text;
            else cj["value"] = num_json(c.value);
            if (c.lo) cj["lo"] = num_json(*c.lo);
            if (c.hi) cj["hi"] = num_json(*c.hi);
            cells.push_back(cj);
        }
        nlohmann::json rj = {{"key", r.key}, {"cells", cells}, {"failed", r.failed}};
        if (r.failed) rj["error"] = r.error;
        rows.push_back(rj);
    }
    return {{"name", t.name}, {"title", t.title}, {"columns", cols}, {"rows", rows}, {"metadata", t.metadata}};
}

ResultTable table_from_json(const nlohmann::json& j) {
    ResultTable t;
    t.name = j.at("name").get<std::string>();
    t.title = j.value("title", std::string());
    for (const auto& c : j.at("columns")) {
        t.columns.push_back({c.at("name").get<std::string>(), interval_from_name(c.value("interval", "none"))});
    }
    for (const auto& r : j.at("rows")) {
        Row row;
        row.key = r.at("key").get<std::string>();
        row.failed = r.value("failed", false);
        row.error = r.value("error", std::string());
        for (const auto& c : r.at("cells")) {
            Cell cell;
            if (c.contains("text")) {
                cell = label(c.at("text").get<std::string>());
            } else {
                cell.value = json_num(c.at("value"));
            }
            if (c.contains("lo")) cell.lo = json_num(c.at("lo"));
            if (c.contains("hi")) cell.hi = json_num(c.at("hi"));
            row.cells.push_back(cell);
        }
        t.rows.push_back(std::move(row));
    }
    t.metadata = j.value("metadata", nlohmann::json::object());
    return t;
}

void write_csv(const ResultTable& t, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    std::vector<std::string> head;
    for (const auto& c : t.columns) {
        head.push_back(csv_escape(c.name));
        if (c.interval != Interval::None) {
            head.push_back(csv_escape(c.name + "_lo"));
            head.push_back(csv_escape(c.name + "_hi"));
        }
    }
    head.push_back("status");
    os << fmt::format("{}\n", fmt::join(head, ","));
    for (const auto& r : t.rows) {
        std::vector<std::string> f;
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            const Cell& c = i < r.cells.size() ? r.cells[i] : Cell{std::nan(""), {}, {}, {}};
            f.push_back(c.text ? csv_escape(*c.text) : fmt_num(c.value));
            if (t.columns[i].interval != Interval::None) {
                f.push_back(c.lo ? fmt_num(*c.lo) : "NA");
                f.push_back(c.hi ? fmt_num(*c.hi) : "NA");
            }
        }
        f.push_back(r.failed ? csv_escape("failed: " + r.error) : "ok");
        os << fmt::format("{}\n", fmt::join(f, ","));
    }
}

std::string to_text(const ResultTable& t) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head;
    for (const auto& c : t.columns) head.push_back(c.name);
    grid.push_back(head);
    for (const auto& r : t.rows) {
        std::vector<std::string> line;
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            if (r.failed && i > 0) {
                line.push_back(i == 1 ? "FAILED" : "");
                continue;
            }
            const Cell& c = r.cells.at(i);
            if (c.text) line.push_back(*c.text);
            else if (std::isnan(c.value)) line.push_back("NA");
            else if (c.lo && c.hi) line.push_back(fmt::format("{:.3f} [{:.3f}, {:.3f}]", c.value, *c.lo, *c.hi));
            else line.push_back(fmt::format("{:.3f}", c.value));
        }
        grid.push_back(line);
    }
    std::vector<std::size_t> width(t.columns.size(), 0);
    for (const auto& line : grid) {
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    }
    std::ostringstream os;
    if (!t.title.empty()) os << t.title << "\n";
    for (std::size_t li = 0; li < grid.size(); ++li) {
        for (std::size_t i = 0; i < grid[li].size(); ++i) {
            os << (i == 0 ? fmt::format("{:<{}}", grid[li][i], width[i]) : fmt::format("  {:>{}}", grid[li][i], width[i]));
        }
        os << "\n";
        if (li == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            os << std::string(total, '-') << "\n";
        }
    }
    for (const auto& r : t.rows) {
        if (r.failed) os << fmt::format("row '{}' failed: {}\n", r.key, r.error);
    }
    return os.str();
}

}  // namespace nullaudit::report
