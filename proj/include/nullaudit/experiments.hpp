#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nullaudit/result_table.hpp"

namespace nullaudit::experiments {

enum class Experiment {
    ScalingLaw,
    RedundancyLaw,
    RedundancyImperfect,
    CapacityInflation,
    ThresholdAmplification,
    FalsificationMatrix,
    DetectionFrontier,
    BreakEvenCost,
    KeffValidation,
    SplitSensitivity
};

std::string_view to_string(Experiment e);
Experiment experiment_from_string(std::string_view s);
const std::vector<Experiment>& all_experiments();

inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct ExperimentSpec {
    Experiment experiment = Experiment::ScalingLaw;
    std::size_t N = 1000;
    std::uint64_t seed = kDefaultSeed;
    std::size_t workers = 0;  // 0: default_workers()
    std::size_t length_T = 2520;
    double split_ratio = 0.6;
    // Overrides merged over default_grid(); unknown keys are rejected.
    nlohmann::json grid = nlohmann::json::object();

    // Throws ContractViolation for N == 0, a bad split, or unknown grid keys.
    void validate() const;
};

nlohmann::json default_grid(Experiment e);
nlohmann::json resolved_grid(const ExperimentSpec& s);
nlohmann::json to_json(const ExperimentSpec& s);
ExperimentSpec experiment_from_json(const nlohmann::json& j);

// Sub-seed for grid cell `cell` of an experiment: derive(master, experiment, cell).
std::uint64_t cell_seed(const ExperimentSpec& s, std::size_t cell);

struct ExperimentResult {
    nlohmann::json resolved;  // spec with the full grid written out
    std::vector<report::ResultTable> tables;
    double seconds = 0.0;

    bool failed() const;
};

// Runs the whole grid. A cell that throws is marked failed and the run goes on.
ExperimentResult run_experiment(const ExperimentSpec& s);

// <table>.csv and <table>.json per table plus manifest.json with every seed.
void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir);

// Closed-form stress test of the raw and stabilized inflation factors as
// walk-forward evidence decays at fixed in-sample strength.
report::ResultTable stabilization_table(double z_is = 3.0, double tau = 0.5,
                                        const std::vector<double>& z_wf = {3.0, 2.0, 1.0, 0.5, 0.25, 0.0});

}  // namespace nullaudit::experiments
