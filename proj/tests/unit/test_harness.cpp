#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <sys/wait.h>

#include "nullaudit/config.hpp"
#include "nullaudit/errors.hpp"
#include "nullaudit/experiments.hpp"
#include "nullaudit/ingest.hpp"
#include "nullaudit/rng.hpp"

using namespace nullaudit;
namespace fs = std::filesystem;

namespace {

// Weekday calendar from 2010-01-04 onward.
std::vector<std::string> weekdays(std::size_t n) {
    using namespace std::chrono;
    std::vector<std::string> out;
    sys_days d = year{2010} / January / 4;
    while (out.size() < n) {
        const weekday w{d};
        if (w != Saturday && w != Sunday) {
            const year_month_day ymd{d};
            out.push_back(fmt::format("{:04d}-{:02d}-{:02d}", int(ymd.year()), unsigned(ymd.month()),
                                      unsigned(ymd.day())));
        }
        d += days{1};
    }
    return out;
}

std::string csv(const std::vector<std::string>& dates, const std::vector<double>& r) {
    std::string s = "date,return\n";
    for (std::size_t i = 0; i < r.size(); ++i) s += fmt::format("{},{:.17g}\n", dates[i], r[i]);
    return s;
}

std::vector<double> small_returns(std::size_t n, std::uint64_t seed) {
    rng::Stream s(seed);
    std::vector<double> r(n);
    for (auto& v : r) v = 0.01 * s.normal();
    return r;
}

std::size_t error_row(std::string_view text, const ingest::Options& opt = {}) {
    try {
        ingest::ingest_text(text, opt);
    } catch (const IngestionError& e) {
        return e.row();
    }
    return static_cast<std::size_t>(-1);
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("nullaudit_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

// ---------------------------------------------------------------- ingestion

TEST(Ingest, ValidFile) {
    const auto d = weekdays(2520);
    const auto r = small_returns(2520, 1);
    const auto res = ingest::ingest_text(csv(d, r));
    EXPECT_EQ(res.path.size(), 2520u);
    EXPECT_FALSE(res.path.simulated);
    EXPECT_EQ(res.path.dates.front(), d.front());
    EXPECT_TRUE(res.warnings.empty());
    EXPECT_EQ(res.gaps.missing_weekdays, 0u);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(res.path.r[i], r[i]);
}

TEST(Ingest, NanNamesTheRow) {
    auto text = csv(weekdays(10), small_returns(10, 2));
    // Replace the 4th data row (file line 5) with NaN.
    std::istringstream in(text);
    std::string line, out;
    for (int n = 1; std::getline(in, line); ++n) out += (n == 5 ? line.substr(0, 11) + "nan" : line) + "\n";
    EXPECT_EQ(error_row(out), 5u);
    ingest::Options lenient;
    lenient.strict = false;
    EXPECT_EQ(error_row(out, lenient), 5u);
}

TEST(Ingest, SentinelRejected) {
    const std::string t = "date,return\n2020-01-02,0.01\n2020-01-03,-99.99\n";
    EXPECT_EQ(error_row(t), 3u);
    ingest::Options lenient;
    lenient.strict = false;
    EXPECT_EQ(error_row(t, lenient), 3u);
}

TEST(Ingest, EmptyAndHeaderOnly) {
    EXPECT_EQ(error_row(""), 0u);
    EXPECT_EQ(error_row("date,return\n"), 1u);
    EXPECT_EQ(error_row("when,what\n2020-01-02,0.01\n"), 1u);
}

TEST(Ingest, MalformedRows) {
    EXPECT_EQ(error_row("date,return\n2020-01-02,0.01\n2020-02-30,0.01\n"), 3u);
    EXPECT_EQ(error_row("date,return\n2020-01-02,0.01,7\n"), 2u);
    EXPECT_EQ(error_row("date,return\n2020-01-02,abc\n"), 2u);
    EXPECT_EQ(error_row("date,return\n2020-01-02,1.5\n"), 2u);
}

TEST(Ingest, LenientSortEqualsSortedOracle) {
    const auto d = weekdays(300);
    const auto r = small_returns(300, 3);
    const auto oracle = ingest::ingest_text(csv(d, r));
    auto dd = d;
    auto rr = r;
    std::swap(dd[10], dd[200]);
    std::swap(rr[10], rr[200]);
    std::swap(dd[0], dd[299]);
    std::swap(rr[0], rr[299]);
    const auto text = csv(dd, rr);
    EXPECT_THROW(ingest::ingest_text(text), IngestionError);
    ingest::Options lenient;
    lenient.strict = false;
    const auto res = ingest::ingest_text(text, lenient);
    EXPECT_FALSE(res.warnings.empty());
    EXPECT_EQ(res.path.r, oracle.path.r);
    EXPECT_EQ(res.path.dates, oracle.path.dates);
}

TEST(Ingest, DuplicateDates) {
    const std::string t = "date,return\n2020-01-02,0.01\n2020-01-02,0.02\n2020-01-03,0.03\n";
    EXPECT_EQ(error_row(t), 3u);
    ingest::Options lenient;
    lenient.strict = false;
    const auto res = ingest::ingest_text(t, lenient);
    ASSERT_EQ(res.path.size(), 2u);
    EXPECT_DOUBLE_EQ(res.path.r[0], 0.01);
}

TEST(Ingest, GapReportCountsMissingWeekdays) {
    // Friday then the following Wednesday: Monday and Tuesday missing.
    const std::string t = "Date,Return\n2020-01-03,0.01\n2020-01-08,0.02\n2020-01-09,0.01\n";
    const auto res = ingest::ingest_text(t);
    EXPECT_EQ(res.gaps.missing_weekdays, 2u);
    ASSERT_EQ(res.gaps.gaps.size(), 1u);
    EXPECT_EQ(res.gaps.gaps[0].after, "2020-01-03");
}

// ---------------------------------------------------------------- config

TEST(Config, DefaultsAreWrittenOut) {
    const auto j = config::to_json(config::default_config());
    EXPECT_EQ(j.at("environments").size(), 5u);
    EXPECT_EQ(j.at("audit").at("alpha").get<double>(), 0.05);
    EXPECT_EQ(j.at("audit").at("tau").get<double>(), 0.5);
    EXPECT_EQ(j.at("audit").at("mode").get<std::string>(), "Reference");
}

TEST(Config, RoundTrip) {
    nlohmann::json j = {
        {"length_T", 1500},
        {"environments",
         {"WhiteNoise",
          {{"id", "Placebo"},
           {"distribution",
            {{"family", "MA1Placebo"}, {"ranges", {{"theta", {-0.8, -0.2}}}}, {"draw_count", 10}, {"role", "Audit"}}}}}},
        {"workflow", {{"family", "DataMiner"}, {"K", 50}}},
        {"audit", {{"M", 600}, {"tau", 0.25}}},
        {"experiment", {{"experiment", "ScalingLaw"}, {"N", 20}, {"grid", {{"K", {1, 5}}}}}}};
    const auto c = config::config_from_json(j);
    EXPECT_EQ(c.length_T, 1500u);
    EXPECT_EQ(c.environments.size(), 2u);
    EXPECT_TRUE(c.environments[1].blind.has_value());
    EXPECT_EQ(c.environments[1].blind->length_T, 1500u);
    EXPECT_EQ(c.workflow.K, 50u);
    EXPECT_EQ(c.workflow.params.tau, 0.25);
    ASSERT_TRUE(c.experiment.has_value());
    EXPECT_EQ(c.experiment->length_T, 1500u);
    const auto resolved = config::to_json(c);
    EXPECT_EQ(config::to_json(config::config_from_json(resolved)), resolved);
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(config::config_from_json({{"lenght_T", 10}}), ContractViolation);
    EXPECT_THROW(config::config_from_json({{"audit", {{"alpah", 0.1}}}}), ContractViolation);
}

// ---------------------------------------------------------------- experiments

TEST(Experiments, WorkerCountDoesNotChangeResults) {
    experiments::ExperimentSpec s;
    s.experiment = experiments::Experiment::ScalingLaw;
    s.N = 40;
    s.length_T = 600;
    s.grid = {{"K", {1, 20}}};
    s.workers = 1;
    const auto a = experiments::run_experiment(s);
    s.workers = 3;
    const auto b = experiments::run_experiment(s);
    ASSERT_EQ(a.tables.size(), b.tables.size());
    for (std::size_t i = 0; i < a.tables.size(); ++i) {
        EXPECT_EQ(report::to_json(a.tables[i]).dump(), report::to_json(b.tables[i]).dump());
    }
}

TEST(Experiments, FailedCellIsMarkedAndRunContinues) {
    experiments::ExperimentSpec s;
    s.experiment = experiments::Experiment::ScalingLaw;
    s.N = 10;
    s.length_T = 400;
    s.grid = {{"K", {0, 3}}};
    const auto r = experiments::run_experiment(s);
    EXPECT_TRUE(r.failed());
    const auto& t = r.tables.at(0);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(t.rows[0].failed);
    EXPECT_FALSE(t.rows[0].error.empty());
    EXPECT_FALSE(t.rows[1].failed);
}

TEST(Experiments, UnknownGridKeyRejected) {
    experiments::ExperimentSpec s;
    s.grid = {{"Kay", {1}}};
    EXPECT_THROW(s.validate(), ContractViolation);
}

TEST(Experiments, OutputsCarrySeedsAndSchema) {
    experiments::ExperimentSpec s;
    s.experiment = experiments::Experiment::DetectionFrontier;
    s.N = 5;
    s.length_T = 500;
    s.grid = {{"phi", {0.25}}, {"theta", {1.0}}};
    const auto r = experiments::run_experiment(s);
    const auto dir = scratch("outputs");
    experiments::write_outputs(r, dir);
    std::ifstream in(dir / "manifest.json");
    const auto m = nlohmann::json::parse(in);
    EXPECT_EQ(m.at("resolved").at("seed").get<std::uint64_t>(), experiments::kDefaultSeed);
    EXPECT_TRUE(m.contains("seed_rule"));
    for (const auto& t : r.tables) {
        EXPECT_TRUE(fs::exists(dir / (t.name + ".csv")));
        EXPECT_TRUE(t.metadata.contains("schema"));
    }
    fs::remove_all(dir);
}

TEST(Experiments, StabilizationTable) {
    const auto t = experiments::stabilization_table();
    EXPECT_DOUBLE_EQ(t.value("1.00", "BIF_stab_tau"), 3.0);
    EXPECT_TRUE(std::isnan(t.value("0.00", "BIF_raw")));
    EXPECT_DOUBLE_EQ(t.value("0.00", "BIF_stab_tau"), 6.0);
}

// ---------------------------------------------------------------- command line

#ifdef NULLAUDIT_CLI_PATH
namespace {

int run_cli(const std::string& args, const fs::path& out) {
    const std::string cmd =
        fmt::format("{} {} --out {} --log-level error > {}/stdout.txt 2>&1", NULLAUDIT_CLI_PATH, args, out.string(),
                    out.string());
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& family) {
    nlohmann::json j = {{"length_T", 1000},
                        {"workflow", {{"family", family}, {"K", 1}}},
                        {"audit", {{"M", 500}}}};
    if (family == "Lookahead") j["workflow"]["params"] = {{"acknowledge_protocol_violation", true}};
    const auto f = dir / (family + ".json");
    std::ofstream(f) << j.dump(2);
    return f;
}

}  // namespace

TEST(Cli, LookaheadExitsTwo) {
    const auto dir = scratch("cli_look");
    const auto cfg = write_config(dir, "Lookahead");
    EXPECT_EQ(run_cli(fmt::format("audit --config {} --env WhiteNoise", cfg.string()), dir), 2);
    EXPECT_TRUE(fs::exists(dir / "audit_report.json"));
    EXPECT_TRUE(fs::exists(dir / "resolved_config.json"));
    fs::remove_all(dir);
}

TEST(Cli, RandomBaselineExitsZero) {
    const auto dir = scratch("cli_base");
    const auto cfg = write_config(dir, "RandomBaseline");
    EXPECT_EQ(run_cli(fmt::format("calibrate --config {}", cfg.string()), dir), 0);
    EXPECT_EQ(run_cli(fmt::format("audit --config {} --calibration {} --env WhiteNoise", cfg.string(), dir.string()),
                      dir),
              0);
    fs::remove_all(dir);
}

TEST(Cli, EmptyCsvIsAnIngestionError) {
    const auto dir = scratch("cli_empty");
    const auto cfg = write_config(dir, "RandomBaseline");
    std::ofstream(dir / "empty.csv").close();
    EXPECT_EQ(run_cli(fmt::format("audit --config {} --data {}", cfg.string(), (dir / "empty.csv").string()), dir), 1);
    std::ifstream in(dir / "stdout.txt");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("ingestion error"), std::string::npos) << text;
    fs::remove_all(dir);
}
#endif
