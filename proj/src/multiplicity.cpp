#include "nullaudit/multiplicity.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "nullaudit/errors.hpp"
#include "nullaudit/simd.hpp"

namespace nullaudit::multiplicity {

namespace {

struct Standardized {
    Eigen::MatrixXd X;  // kept columns, centred and scaled by the n-1 sd
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;
};

Standardized standardize(const Eigen::Ref<const Eigen::MatrixXd>& data) {
    const Eigen::Index n = data.rows();
    const Eigen::Index K = data.cols();
    if (n < 2) throw ContractViolation("panel needs at least 2 rows");
    if (K < 1) throw ContractViolation("panel needs at least 1 column");
    if (!data.allFinite()) throw ContractViolation("panel contains non-finite values");

    Standardized s;
    std::vector<double> mean(static_cast<std::size_t>(K)), sd(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) {
        const double m = data.col(k).mean();
        const double var = (data.col(k).array() - m).square().sum() / static_cast<double>(n - 1);
        if (var > 1e-24 * (1.0 + m * m)) {
            s.kept.push_back(static_cast<std::size_t>(k));
            mean[static_cast<std::size_t>(k)] = m;
            sd[static_cast<std::size_t>(k)] = std::sqrt(var);
        } else {
            s.dropped.push_back(static_cast<std::size_t>(k));
        }
    }
    if (s.kept.empty()) throw ContractViolation("every panel column has zero variance");
    if (!s.dropped.empty()) {
        spdlog::warn("K_eff: dropped {} zero-variance column(s) of {}", s.dropped.size(), K);
    }
    s.X.resize(n, static_cast<Eigen::Index>(s.kept.size()));
    for (std::size_t j = 0; j < s.kept.size(); ++j) {
        const auto k = static_cast<Eigen::Index>(s.kept[j]);
        s.X.col(static_cast<Eigen::Index>(j)) =
            (data.col(k).array() - mean[s.kept[j]]) / sd[s.kept[j]];
    }
    return s;
}

struct GramSums {
    Eigen::MatrixXd R;  // lower triangle valid
    double sum_r2 = 0.0;    // sum over i > j of r_ij^2
    double sum_var = 0.0;   // sum over i > j of Var-hat(r_ij)
};

GramSums gram_sums(const Eigen::MatrixXd& X, bool need_var) {
    const Eigen::Index n = X.rows();
    const Eigen::Index K = X.cols();
    const double nn = static_cast<double>(n);
    GramSums g;
    g.R.resize(K, K);
    simd::gram(X.data(), static_cast<std::size_t>(n), static_cast<std::size_t>(K), g.R.data());
    double sum_g2 = 0.0;
    for (Eigen::Index j = 0; j < K; ++j) {
        for (Eigen::Index i = j + 1; i < K; ++i) {
            const double G = g.R(i, j);
            sum_g2 += G * G;
            const double r = G / (nn - 1.0);
            g.sum_r2 += r * r;
            g.R(i, j) = r;
        }
        g.R(j, j) = 1.0;
    }
    if (need_var) {
        // w_tij = x_ti x_tj; r = G/(n-1); Var-hat(r) = n/(n-1)^3 sum_t (w_tij - G_ij/n)^2
        // = n/(n-1)^3 (W2_ij - G_ij^2/n) with W2_ij = sum_t x_ti^2 x_tj^2. Summed over
        // i > j, W2 needs only row sums: sum_t ((sum_i x_ti^2)^2 - sum_i x_ti^4) / 2.
        Eigen::ArrayXd s2 = Eigen::ArrayXd::Zero(n);
        double s4 = 0.0;
        for (Eigen::Index i = 0; i < K; ++i) {
            const Eigen::ArrayXd q = X.col(i).array().square();
            s2 += q;
            s4 += q.square().sum();
        }
        const double w2 = 0.5 * (s2.square().sum() - s4);
        const double vscale = nn / ((nn - 1.0) * (nn - 1.0) * (nn - 1.0));
        g.sum_var = vscale * std::max(w2 - sum_g2 / nn, 0.0);
    }
    return g;
}

double clamp_lambda(double num, double den) {
    if (!(den > 0.0)) return 1.0;
    return std::clamp(num / den, 0.0, 1.0);
}

}  // namespace

ShrinkageResult shrink_correlation(const CandidatePanel& panel) {
    Standardized s = standardize(panel.data);
    ShrinkageResult out;
    out.kept = s.kept;
    out.dropped = s.dropped;
    const Eigen::Index K = s.X.cols();
    if (K == 1) {
        out.sigma = Eigen::MatrixXd::Identity(1, 1);
        out.lambda = 1.0;
        return out;
    }
    GramSums g = gram_sums(s.X, true);
    out.lambda = clamp_lambda(g.sum_var, g.sum_r2);
    out.sigma.resize(K, K);
    for (Eigen::Index j = 0; j < K; ++j) {
        out.sigma(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < K; ++i) {
            const double v = (1.0 - out.lambda) * g.R(i, j);
            out.sigma(i, j) = v;
            out.sigma(j, i) = v;
        }
    }
    return out;
}

EffectiveMultiplicity k_eff(const Eigen::MatrixXd& c) {
    if (c.rows() != c.cols() || c.rows() < 1) throw ContractViolation("correlation must be square");
    if (!c.allFinite()) throw ContractViolation("correlation has non-finite entries");
    const Eigen::Index K = c.rows();
    for (Eigen::Index i = 0; i < K; ++i) {
        if (std::fabs(c(i, i) - 1.0) > 1e-8) throw ContractViolation("correlation diagonal must be 1");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::fabs(c(i, j) - c(j, i)) > 1e-8) throw ContractViolation("correlation must be symmetric");
        }
    }
    EffectiveMultiplicity e;
    const double k = static_cast<double>(K);
    e.k_eff = k * k / c.squaredNorm();
    e.K_nominal = static_cast<std::size_t>(K);
    e.shrinkage_lambda = 0.0;
    return e;
}

double k_eff_eigen(const Eigen::MatrixXd& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double s = ev.sum();
    return s * s / ev.squaredNorm();
}

double k_eff_population(const std::vector<std::size_t>& block_sizes, double rho) {
    double K = 0.0;
    double denom = 0.0;
    for (std::size_t sz : block_sizes) {
        const double s = static_cast<double>(sz);
        K += s;
        denom += s + rho * rho * s * (s - 1.0);
    }
    return K * K / denom;
}

EffectiveMultiplicity estimate_k_eff(const Eigen::Ref<const Eigen::MatrixXd>& data) {
    Standardized s = standardize(data);
    EffectiveMultiplicity e;
    e.K_nominal = static_cast<std::size_t>(data.cols());
    e.K_dropped = s.dropped.size();
    const double k = static_cast<double>(s.X.cols());
    if (s.X.cols() == 1) {
        e.k_eff = 1.0;
        e.shrinkage_lambda = 1.0;
        return e;
    }
    const GramSums g = gram_sums(s.X, true);
    e.shrinkage_lambda = clamp_lambda(g.sum_var, g.sum_r2);
    const double shrink = 1.0 - e.shrinkage_lambda;
    e.k_eff = k * k / (k + 2.0 * shrink * shrink * g.sum_r2);
    return e;
}

EffectiveMultiplicity estimate_k_eff(const CandidatePanel& panel) { return estimate_k_eff(panel.data); }

EffectiveMultiplicity sample_k_eff(const Eigen::Ref<const Eigen::MatrixXd>& data) {
    Standardized s = standardize(data);
    EffectiveMultiplicity e;
    e.K_nominal = static_cast<std::size_t>(data.cols());
    e.K_dropped = s.dropped.size();
    e.shrinkage_lambda = 0.0;
    const double k = static_cast<double>(s.X.cols());
    if (s.X.cols() == 1) {
        e.k_eff = 1.0;
        return e;
    }
    const GramSums g = gram_sums(s.X, false);
    e.k_eff = k * k / (k + 2.0 * g.sum_r2);
    return e;
}

}  // namespace nullaudit::multiplicity
