#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nullaudit/diagnostics.hpp"
#include "nullaudit/environments.hpp"
#include "nullaudit/workflows.hpp"

namespace nullaudit::audit {

inline constexpr std::size_t kMinCalibrationReps = 500;
inline constexpr int kReportVersion = 1;

// One null environment: either a fixed parameter point or a blind distribution.
// With a distribution, replication m uses draw m mod draw_count on a fresh path.
struct NullEnvironment {
    std::string id;
    env::EnvironmentSpec spec;
    std::optional<env::ParameterDistribution> blind;
};

// The five canonical induced nulls at default calibration.
std::vector<NullEnvironment> canonical_environments(std::size_t length_T = 2520);

// Environment spec for replication `rep` of environment number `env_index`
// under `master`. Path seeds and workflow seeds come from separate streams.
env::EnvironmentSpec replication_spec(const NullEnvironment& e, std::size_t env_index, std::uint64_t master,
                                      std::size_t rep);
std::uint64_t replication_workflow_seed(std::uint64_t master, std::size_t env_index, std::size_t rep);
workflows::SelectionOutcome run_replication(const workflows::WorkflowSpec& w, const NullEnvironment& e,
                                            std::size_t env_index, std::uint64_t master, std::size_t rep);

struct EnvCalibration {
    std::string id;
    nlohmann::json source;  // spec or distribution, for replay
    std::vector<double> z_wf_star;
    std::vector<double> delta_z;
    double zeta = 0.0;  // type-1 quantile of z_wf_star at the Bonferroni level
};

// Reference: the null runs use an honest independent search with the audited
// workflow's dimensions (RandomBaseline at K=1, DataMiner otherwise), so a leaky
// or placebo-exploiting pipeline cannot set its own threshold. Self: the audited
// workflow itself is simulated.
enum class CalibrationMode { Reference, Self };
std::string_view to_string(CalibrationMode m);
CalibrationMode calibration_mode_from_string(std::string_view s);

// Workflow simulated under the null for a given audited workflow and mode.
workflows::WorkflowSpec null_workflow(const workflows::WorkflowSpec& audited, CalibrationMode mode);

struct NullCalibration {
    CalibrationMode mode = CalibrationMode::Reference;
    nlohmann::json simulated;  // workflow actually run under the null
    nlohmann::json workflow;  // audited workflow the archive is bound to
    std::uint64_t workflow_hash = 0;
    std::size_t M = 0;
    double alpha = 0.05;
    double level = 0.99;  // 1 - alpha / |envs|
    std::uint64_t seed = 0;
    std::vector<EnvCalibration> envs;

    const EnvCalibration& find(const std::string& id) const;
    // Null Delta-Z sample for Stage 2: the WhiteNoise environment(s) when present,
    // otherwise every environment pooled.
    std::vector<double> stage2_null_delta() const;
};

// Throws ContractViolation for M < kMinCalibrationReps, alpha outside (0,1),
// an empty environment list, duplicate ids, or a Dev-role blind distribution.
NullCalibration calibrate_stage1(const workflows::WorkflowSpec& w, const std::vector<NullEnvironment>& envs,
                                 std::size_t M, double alpha, std::uint64_t seed, std::size_t workers = 0,
                                 CalibrationMode mode = CalibrationMode::Reference);

struct Stage1Record {
    std::string id;
    double observed = 0.0;
    double zeta = 0.0;
    double margin = 0.0;  // zeta - observed
    bool failed = false;
};

struct Stage1Verdict {
    std::vector<Stage1Record> records;
    bool falsified = false;
};

// Throws CalibrationMismatch when the workflow hash differs, ContractViolation when
// an observation and the calibration do not cover the same environments.
Stage1Verdict stage1_gate(const std::map<std::string, double>& observed, const NullCalibration& cal,
                          std::uint64_t workflow_hash);

struct Stage2Verdict {
    InflationDiagnostics diag;
    double eps95 = 0.0;
    double eps99 = 0.0;
    bool inflation_flag = false;  // delta_z > eps99
    bool warning = false;         // delta_z > eps95
    bool worst_case = false;      // thresholds from the maximal-multiplicity fallback
    std::optional<double> k_eff;
};

// Throws ContractViolation on an empty null sample.
Stage2Verdict stage2_classify(const InflationDiagnostics& diag, const std::vector<double>& null_delta_sample);

// Fallback null when no workflow-matched calibration exists: independent search
// (DataMiner geometry) at the nominal K on WhiteNoise, same split and length.
std::vector<double> worst_case_null_delta(std::size_t K, std::size_t length_T, double split_ratio, std::size_t M,
                                          std::uint64_t seed, std::size_t workers = 0);

struct AuditReport {
    std::uint64_t workflow_hash = 0;
    std::string workflow_family;
    std::string target;
    Stage1Verdict stage1;
    std::optional<Stage2Verdict> stage2;
    // 0 pass, 2 falsified, 3 inflation flagged.
    int exit_code() const;
};

// Runs the workflow once per calibrated environment on audit-seeded paths, then
// (if Stage 1 passes) runs it on `target` and classifies the gap. The Stage-2
// null comes from the calibration unless it has none or `force_worst_case`.
AuditReport run_audit(const workflows::WorkflowSpec& w, const NullCalibration& cal,
                      const std::vector<NullEnvironment>& envs, const env::ReturnPath& target,
                      std::uint64_t audit_seed, bool force_worst_case = false, std::size_t workers = 0);

nlohmann::json to_json(const InflationDiagnostics& d);
nlohmann::json to_json(const AuditReport& r);
std::string to_text(const AuditReport& r);

// Archive: manifest.json plus one CSV of (rep, z_wf_star, delta_z) per environment.
void save_calibration(const NullCalibration& cal, const std::filesystem::path& dir);
NullCalibration load_calibration(const std::filesystem::path& dir);

}  // namespace nullaudit::audit
