#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace nullaudit::env {

inline constexpr double kTradingDays = 252.0;

enum class Family { WhiteNoise, RegimeSwitch, MA1Placebo, FactorNull, Garch11, TarPositive };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

// Annualized vols everywhere; daily scale = ann / sqrt(252).
struct WhiteNoiseParams {
    double sigma_ann = 0.20;
};
struct RegimeSwitchParams {
    double sigma_ann_low = 0.10;
    double vol_multiplier = 3.0;
    double p11 = 0.98;
    double p22 = 0.98;
};
struct MA1PlaceboParams {
    double sigma_ann = 0.20;
    double theta = -0.5;
};
struct FactorNullParams {
    double beta = 1.0;
    double sigma_f_ann = 0.20;
    double sigma_e_ann = 0.10;
};
struct Garch11Params {
    double alpha = 0.10;
    double beta = 0.85;
    double sigma_ann = 0.20;
};
struct TarParams {
    double phi = 0.0;
    double theta_act = 1.0;
    double sigma_ann = 0.15;
};

using Params = std::variant<WhiteNoiseParams, RegimeSwitchParams, MA1PlaceboParams,
                            FactorNullParams, Garch11Params, TarParams>;

struct EnvironmentSpec {
    Family family = Family::WhiteNoise;
    Params params = WhiteNoiseParams{};
    std::size_t length_T = 2520;
    std::uint64_t seed = 0;

    // Throws ParameterDomainError.
    void validate() const;
};

struct ReturnPath {
    std::vector<double> r;
    std::string label;  // environment family name or data source
    std::uint64_t seed = 0;
    EnvironmentSpec spec;  // meaningful for simulated paths only
    bool simulated = true;
    std::vector<std::string> dates;  // ingested paths only

    std::size_t size() const { return r.size(); }
};

Params default_calibration(Family family);
EnvironmentSpec default_spec(Family family, std::size_t length_T = 2520, std::uint64_t seed = 0);

ReturnPath generate(const EnvironmentSpec& spec);

// Blind-parameter protocol.
enum class Role { Dev, Audit };
std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct ParameterDistribution {
    Family family = Family::MA1Placebo;
    // Keys are parameter field names (e.g. "theta"); unlisted fields keep defaults.
    std::map<std::string, Range> ranges;
    std::size_t draw_count = 1;
    std::uint64_t seed = 0;
    Role role = Role::Dev;
    std::size_t length_T = 2520;
};

struct ParameterDraw {
    EnvironmentSpec spec;
    std::uint64_t lineage = 0;  // role-salted seed the draw came from
    std::size_t index = 0;
};

std::vector<ParameterDraw> draw_parameter_sets(const ParameterDistribution& dist);
std::uint64_t lineage_seed(std::uint64_t seed, Role role);
// Throws ContractViolation when a Dev and an Audit set share any seed.
void check_disjoint(const std::vector<ParameterDraw>& dev, const std::vector<ParameterDraw>& audit);

// Serialization.
nlohmann::json to_json(const EnvironmentSpec& spec);
EnvironmentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParameterDistribution& d);
ParameterDistribution distribution_from_json(const nlohmann::json& j);

void write_csv(const ReturnPath& path, const std::filesystem::path& file);
// Columnar dump: magic, count, then the return column as little-endian doubles.
void write_binary(const ReturnPath& path, const std::filesystem::path& file);
ReturnPath read_binary(const std::filesystem::path& file);

}  // namespace nullaudit::env
