#pragma once

#include <optional>

namespace nullaudit::audit {

inline constexpr double kDefaultTau = 0.5;

struct InflationDiagnostics {
    double z_is_star = 0.0;
    double z_wf_star = 0.0;
    double delta_z = 0.0;
    std::optional<double> bif_raw;  // absent when z_wf_star == 0
    double bif_stab = 0.0;
    double tau = kDefaultTau;
    double deflator = 0.0;  // 1 / bif_stab
    bool gated = false;     // z_wf_star >= tau
};

// delta_z = z_is - z_wf; bif_stab = z_is / max(z_wf, tau).
// Throws ContractViolation on negative or non-finite input, or tau <= 0.
InflationDiagnostics inflation_diagnostics(double z_is_star, double z_wf_star, double tau = kDefaultTau);

}  // namespace nullaudit::audit
