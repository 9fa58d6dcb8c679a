#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nullaudit/diagnostics.hpp"
#include "nullaudit/environments.hpp"

namespace nullaudit::workflows {

enum class Family {
    RandomBaseline,
    DataMiner,
    Lookahead,
    Contrarian,
    RegimeDetector,
    FactorMimic,
    FeatureMining,
    CorrelatedFamilySearch,
    TrendFollowing
};

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

struct ThresholdTransform {
    enum class Kind { None, SignOnly, Fixed, AdaptiveQuantile };
    Kind kind = Kind::None;
    double param = 0.0;  // threshold for Fixed, q for AdaptiveQuantile

    static ThresholdTransform none() { return {}; }
    static ThresholdTransform sign_only() { return {Kind::SignOnly, 0.0}; }
    static ThresholdTransform fixed(double thr) { return {Kind::Fixed, thr}; }
    static ThresholdTransform adaptive_quantile(double q) { return {Kind::AdaptiveQuantile, q}; }

    std::string label() const;
    void validate() const;
};

// Block on which K_eff panels are formed.
enum class KeffBlock { InSample, WalkForward };

struct FamilyParams {
    // Contrarian: x_t = clip(-theta r_{t-1} / (3 sd_IS), -1, 1).
    double contrarian_theta = 1.0;
    // RegimeDetector: long when the rolling sd is at or below the IS quantile, flat otherwise.
    std::size_t regime_window = 20;
    double regime_quantile = 0.80;
    // CorrelatedFamilySearch.
    double rho = 0.9;
    std::size_t clusters = 1;
    ThresholdTransform transform;
    // TrendFollowing: breakout on the trailing L-day sum, |sum| > thr * sd_IS * sqrt(L).
    std::vector<std::size_t> trend_lookbacks = {1};
    std::vector<double> trend_thresholds = {0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9,
                                            2.1, 2.3, 2.5, 2.7, 2.9, 3.1, 3.3, 3.5};
    std::size_t min_trades = 10;
    // K_eff diagnostics are optional: they dominate runtime at large K.
    bool keff_pred = false;
    bool keff_signal = false;
    KeffBlock keff_block = KeffBlock::InSample;
    // Lookahead must be built knowingly.
    bool acknowledge_protocol_violation = false;
    double tau = audit::kDefaultTau;
};

struct WorkflowSpec {
    Family family = Family::RandomBaseline;
    std::size_t K = 1;
    double split_ratio = 0.6;
    std::uint64_t seed = 0;
    FamilyParams params;

    void validate() const;
};

nlohmann::json to_json(const ThresholdTransform& t);
ThresholdTransform transform_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WorkflowSpec& w);
WorkflowSpec workflow_from_json(const nlohmann::json& j);
// Stable content hash of the canonical JSON form.
std::uint64_t spec_hash(const WorkflowSpec& w);

// Owns the in-sample / walk-forward split. The split index is fixed at
// construction; walk-forward data is unreachable until selection is finalized.
class SplitPath {
public:
    SplitPath(const env::ReturnPath& path, double split_ratio);

    std::size_t T() const { return r_.size(); }
    std::size_t n_is() const { return n_is_; }
    std::size_t n_wf() const { return r_.size() - n_is_; }
    std::span<const double> in_sample() const { return {r_.data(), n_is_}; }

    void finalize_selection(std::size_t winner);
    bool finalized() const { return finalized_; }
    std::optional<std::size_t> winner() const { return winner_; }
    // Both throw ProtocolViolation before finalize_selection.
    std::span<const double> full() const;
    std::span<const double> walk_forward() const;

private:
    std::span<const double> r_;
    const std::size_t n_is_;
    bool finalized_ = false;
    std::optional<std::size_t> winner_;
};

// Causal view: positions for row t may read r_0..r_{t-1} only.
class CausalFeed {
public:
    explicit CausalFeed(std::span<const double> r) : r_(r) {}
    std::size_t size() const { return r_.size(); }
    // r_{t-lag}; lag >= 1. Returns 0 when t < lag (no history yet).
    double lagged(std::size_t t, std::size_t lag) const;
    std::span<const double> history(std::size_t t) const { return r_.first(t); }

private:
    friend class SignalRule;
    std::span<const double> r_;
};

class SignalRule {
public:
    using CausalFn = std::function<void(const CausalFeed&, std::span<double>)>;
    // Reads the contemporaneous return: a protocol violation by construction.
    using UnsafeFn = std::function<void(std::span<const double>, std::span<double>)>;

    static SignalRule causal(std::string id, Family family, std::size_t warmup, CausalFn fn);
    // Throws ProtocolViolation unless the caller acknowledges the violation.
    static SignalRule unsafe_lookahead(std::string id, std::size_t warmup, UnsafeFn fn,
                                       bool acknowledge_violation);

    const std::string& id() const { return id_; }
    Family family() const { return family_; }
    std::size_t warmup() const { return warmup_; }
    bool violates_protocol() const { return unsafe_ != nullptr; }

    // out.size() == feed.size(); out[t] in [-1, 1] except raw-score surrogates.
    void positions(const CausalFeed& feed, std::span<double> out) const;

private:
    SignalRule() = default;
    std::string id_;
    Family family_ = Family::RandomBaseline;
    std::size_t warmup_ = 0;
    CausalFn causal_;
    UnsafeFn unsafe_;
};

struct CandidateSet {
    std::vector<SignalRule> rules;
    // Continuous prediction scores for rows [t0, t1), all candidates (T x K).
    // Empty function: the family has no separate prediction layer.
    std::function<Eigen::MatrixXd(std::size_t, std::size_t)> scores;
    std::size_t size() const { return rules.size(); }
};

// Candidate construction sees the in-sample block only.
CandidateSet build_candidates(const WorkflowSpec& spec, const SplitPath& split);

// Apply a transform column-wise. AdaptiveQuantile cutoffs come from rows
// [0, n_fit) of `scores`, which must be in-sample rows.
Eigen::MatrixXd apply_threshold(const Eigen::MatrixXd& scores, const ThresholdTransform& t,
                                std::size_t n_fit);
// Per-column adaptive cutoffs (type-1 quantile of |score| over the fit rows).
std::vector<double> adaptive_cutoffs(const Eigen::MatrixXd& fit_scores, double q);
void apply_threshold_inplace(Eigen::Ref<Eigen::MatrixXd> block, const ThresholdTransform& t,
                             const std::vector<double>& cutoffs);

struct SelectionOutcome {
    bool selected = false;      // false when no candidate was eligible
    std::size_t winner_index = 0;
    std::size_t tie_count = 1;  // candidates sharing the maximal |Z_IS|
    std::size_t eligible = 0;
    double z_is_signed = 0.0;
    double z_wf_signed = 0.0;
    double z_is_star = 0.0;
    double z_wf_star = 0.0;
    double delta_z = 0.0;
    std::optional<double> bif_raw;
    double bif_stab = 0.0;
    std::optional<double> k_eff_pred;
    std::optional<double> k_eff_signal;
    std::optional<double> lambda_pred;
    std::optional<double> lambda_signal;
    std::size_t n_is = 0;
    std::size_t n_wf = 0;
    bool degenerate = false;     // winner's WF variance hit the floor
    bool protocol_violation = false;
    // Winner positions on the WF block plus the last IS position (for cost accounting).
    std::vector<double> wf_positions;
    double last_is_position = 0.0;
};

struct RunOptions {
    bool keep_wf_positions = false;
};

SelectionOutcome run_selection(const WorkflowSpec& spec, const env::ReturnPath& path,
                               const RunOptions& opts = {});

nlohmann::json to_json(const SelectionOutcome& o);
std::string outcome_csv_header();
std::string outcome_csv_row(const SelectionOutcome& o);

}  // namespace nullaudit::workflows
