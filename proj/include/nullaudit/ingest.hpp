#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nullaudit/environments.hpp"

namespace nullaudit::ingest {

// Missing-value code some vendors write in place of a return.
inline constexpr double kSentinel = -99.99;

struct Options {
    // Strict: duplicates, out-of-order dates, unparseable numbers and |r| > limit
    // are errors. Lenient: they become warnings (drop, sort, drop, keep).
    bool strict = true;
    double max_abs_return = 1.0;
};

struct Gap {
    std::string after;   // last date before the gap
    std::string before;  // first date after it
    std::size_t missing_weekdays = 0;
};

struct GapReport {
    std::size_t missing_weekdays = 0;
    std::vector<Gap> gaps;
};

struct Result {
    env::ReturnPath path;  // simulated = false, dates filled
    std::vector<std::string> warnings;
    GapReport gaps;
};

// CSV with header "date,return" (case-insensitive), ISO dates, daily simple
// returns. NaN, infinities and the sentinel are always rejected. Throws
// IngestionError naming the 1-based line of the offending row (0 for the file).
Result ingest_text(std::string_view text, const Options& opt = {}, const std::string& source = "csv");
Result ingest_returns(const std::filesystem::path& file, const Options& opt = {});

}  // namespace nullaudit::ingest
