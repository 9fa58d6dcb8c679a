#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nullaudit/inference.hpp"

namespace nullaudit::multiplicity {

// T rows x K columns, column-major so each candidate is contiguous.
struct CandidatePanel {
    Eigen::MatrixXd data;
    inference::Phase phase = inference::Phase::InSample;
    std::vector<std::string> ids;  // optional; empty means "0..K-1"

    std::size_t T() const { return static_cast<std::size_t>(data.rows()); }
    std::size_t K() const { return static_cast<std::size_t>(data.cols()); }
};

struct ShrinkageResult {
    Eigen::MatrixXd sigma;                // over the kept columns, unit diagonal
    double lambda = 1.0;
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;     // zero-variance columns
};

struct EffectiveMultiplicity {
    double k_eff = 1.0;
    double shrinkage_lambda = 1.0;
    std::size_t K_nominal = 1;
    std::size_t K_dropped = 0;
};

// Columns whose sample variance is zero (to relative tolerance) are dropped
// with a warning. Throws ContractViolation if every column is degenerate or T < 2.
ShrinkageResult shrink_correlation(const CandidatePanel& panel);

// K^2 / ||Sigma||_F^2. Throws ContractViolation if the diagonal deviates from 1
// by more than 1e-8 or the matrix is not square/symmetric/finite.
EffectiveMultiplicity k_eff(const Eigen::MatrixXd& correlation);

// Eigenvalue route (sum lambda)^2 / sum lambda^2; used to cross-check k_eff.
double k_eff_eigen(const Eigen::MatrixXd& correlation);

// K^2 / sum_c (s_c + rho^2 s_c (s_c - 1)).
double k_eff_population(const std::vector<std::size_t>& block_sizes, double rho);

// Production path: shrinkage K_eff straight from the panel via two Gram
// products, never forming Sigma-hat. Dropped columns contribute 0; K_nominal
// counts them.
EffectiveMultiplicity estimate_k_eff(const CandidatePanel& panel);
EffectiveMultiplicity estimate_k_eff(const Eigen::Ref<const Eigen::MatrixXd>& data);

// Naive estimator on the raw sample correlation (lambda forced to 0).
EffectiveMultiplicity sample_k_eff(const Eigen::Ref<const Eigen::MatrixXd>& data);

}  // namespace nullaudit::multiplicity
