#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "nullaudit/audit.hpp"
#include "nullaudit/experiments.hpp"
#include "nullaudit/workflows.hpp"

namespace nullaudit::config {

inline constexpr std::uint64_t kCalibrationSeed = 0xCA11B4A7E;
inline constexpr std::uint64_t kAuditSeed = 0xA0D17;

struct AuditSettings {
    double alpha = 0.05;
    std::size_t M = 1000;
    std::uint64_t seed = kCalibrationSeed;
    std::uint64_t audit_seed = kAuditSeed;
    audit::CalibrationMode mode = audit::CalibrationMode::Reference;
    bool force_worst_case = false;
};

// One JSON document per run with sections {environments, workflow, audit, experiment}.
struct RunConfig {
    std::size_t length_T = 2520;
    std::vector<audit::NullEnvironment> environments;  // canonical five by default
    workflows::WorkflowSpec workflow;
    AuditSettings audit;
    std::optional<experiments::ExperimentSpec> experiment;
};

RunConfig default_config();

// Environment entries are a family name ("WhiteNoise"), {id, spec}, {id, distribution}
// or {id, blind_file}; blind_file paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& file);

// Fully resolved form: every default written out.
nlohmann::json to_json(const RunConfig& c);

}  // namespace nullaudit::config
