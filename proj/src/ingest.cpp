#include "nullaudit/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "nullaudit/errors.hpp"

namespace nullaudit::ingest {

namespace {

namespace chr = std::chrono;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = line.find(',', start);
        out.push_back(trim(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string o(s);
    std::transform(o.begin(), o.end(), o.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return o;
}

bool parse_int(std::string_view s, int& v) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
}

// YYYY-MM-DD, validated against the calendar.
bool parse_date(std::string_view s, chr::sys_days& out) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y = 0, m = 0, d = 0;
    if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), m) || !parse_int(s.substr(8, 2), d)) return false;
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return false;
    out = chr::sys_days{ymd};
    return true;
}

bool is_weekday(chr::sys_days d) {
    const chr::weekday w{d};
    return w != chr::Saturday && w != chr::Sunday;
}

enum class NumberKind { Ok, Unparseable, NonFinite };

NumberKind parse_number(std::string_view s, double& v) {
    const std::string l = lower(s);
    if (l == "nan" || l == "na" || l == "inf" || l == "-inf" || l == "+inf" || l == "infinity" || l == "-infinity") {
        return NumberKind::NonFinite;
    }
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return NumberKind::Unparseable;
    if (!std::isfinite(v)) return NumberKind::NonFinite;
    return NumberKind::Ok;
}

struct Entry {
    chr::sys_days date;
    std::string text;
    double r = 0.0;
    std::size_t line = 0;
};

}  // namespace

Result ingest_text(std::string_view text, const Options& opt, const std::string& source) {
    Result res;
    auto warn = [&](std::size_t line, const std::string& msg) {
        const auto w = fmt::format("row {}: {}", line, msg);
        spdlog::warn("{}: {}", source, w);
        res.warnings.push_back(w);
    };
    auto problem = [&](std::size_t line, const std::string& msg) {
        if (opt.strict) throw IngestionError(line, msg);
        warn(line, msg);
    };

    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto p = text.find('\n', start);
            lines.push_back(text.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
            if (p == std::string_view::npos) break;
            start = p + 1;
        }
    }
    // Trailing blank lines are not rows.
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw IngestionError(0, "empty input");
    if (lines[0].size() >= 3 && lines[0].substr(0, 3) == "\xEF\xBB\xBF") lines[0].remove_prefix(3);

    const auto head = split(lines[0]);
    if (head.size() != 2 || lower(head[0]) != "date" || lower(head[1]) != "return") {
        throw IngestionError(1, "header must be 'date,return'");
    }
    if (lines.size() == 1) throw IngestionError(1, "no data rows after the header");

    std::vector<Entry> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line = i + 1;
        if (trim(lines[i]).empty()) {
            problem(line, "blank line");
            continue;
        }
        const auto f = split(lines[i]);
        if (f.size() != 2) throw IngestionError(line, fmt::format("expected 2 fields, found {}", f.size()));
        Entry e;
        e.line = line;
        e.text = std::string(f[0]);
        if (!parse_date(f[0], e.date)) throw IngestionError(line, fmt::format("invalid date '{}'", f[0]));
        switch (parse_number(f[1], e.r)) {
            case NumberKind::NonFinite:
                throw IngestionError(line, fmt::format("non-finite return '{}'", f[1]));
            case NumberKind::Unparseable:
                problem(line, fmt::format("unparseable return '{}'", f[1]));
                continue;
            case NumberKind::Ok: break;
        }
        if (e.r == kSentinel) throw IngestionError(line, "sentinel missing value -99.99");
        if (std::fabs(e.r) > opt.max_abs_return) {
            problem(line, fmt::format("suspicious return {} (|r| > {})", e.r, opt.max_abs_return));
        }
        rows.push_back(std::move(e));
    }

    bool sorted = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].date < rows[i - 1].date) {
            sorted = false;
            problem(rows[i].line, fmt::format("date {} precedes {}", rows[i].text, rows[i - 1].text));
            break;
        }
    }
    if (!sorted) {
        std::stable_sort(rows.begin(), rows.end(), [](const Entry& a, const Entry& b) { return a.date < b.date; });
        warn(0, "dates sorted chronologically");
    }
    std::vector<Entry> unique;
    for (auto& e : rows) {
        if (!unique.empty() && unique.back().date == e.date) {
            if (opt.strict) throw IngestionError(e.line, fmt::format("duplicate date {}", e.text));
            warn(e.line, fmt::format("duplicate date {} dropped", e.text));
            continue;
        }
        unique.push_back(std::move(e));
    }
    if (unique.empty()) throw IngestionError(0, "no valid rows");

    for (std::size_t i = 1; i < unique.size(); ++i) {
        std::size_t missing = 0;
        for (auto d = unique[i - 1].date + chr::days{1}; d < unique[i].date; d += chr::days{1}) {
            if (is_weekday(d)) ++missing;
        }
        if (missing > 0) {
            res.gaps.gaps.push_back({unique[i - 1].text, unique[i].text, missing});
            res.gaps.missing_weekdays += missing;
        }
    }
    if (res.gaps.missing_weekdays > 0) {
        spdlog::info("{}: {} missing weekdays across {} gaps", source, res.gaps.missing_weekdays,
                     res.gaps.gaps.size());
    }

    res.path.label = source;
    res.path.simulated = false;
    res.path.r.reserve(unique.size());
    for (const auto& e : unique) {
        res.path.r.push_back(e.r);
        res.path.dates.push_back(e.text);
    }
    res.path.spec.length_T = unique.size();
    return res;
}

Result ingest_returns(const std::filesystem::path& file, const Options& opt) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IngestionError(0, fmt::format("cannot open {}", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ingest_text(ss.str(), opt, file.filename().string());
}

}  // namespace nullaudit::ingest
