#include "nullaudit/workflows.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "nullaudit/errors.hpp"
#include "nullaudit/inference.hpp"
#include "nullaudit/multiplicity.hpp"
#include "nullaudit/rng.hpp"
#include "nullaudit/stats.hpp"

namespace nullaudit::workflows {

namespace {

constexpr std::array<std::string_view, 9> kNames = {
    "RandomBaseline", "DataMiner",   "Lookahead",   "Contrarian",    "RegimeDetector",
    "FactorMimic",    "FeatureMining", "CorrelatedFamilySearch", "TrendFollowing"};

// Stream tags: one independent stream per (workflow seed, tag, candidate/cluster).
enum : std::uint64_t { kSignTag = 11, kMagTag = 12, kFactorTag = 13, kIdioTag = 14 };

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<std::size_t> equal_cluster_sizes(std::size_t K, std::size_t m) {
    std::vector<std::size_t> sizes(m, K / m);
    for (std::size_t c = 0; c < K % m; ++c) ++sizes[c];
    return sizes;
}

const char* kind_name(ThresholdTransform::Kind k) {
    switch (k) {
        case ThresholdTransform::Kind::None: return "None";
        case ThresholdTransform::Kind::SignOnly: return "SignOnly";
        case ThresholdTransform::Kind::Fixed: return "Fixed";
        case ThresholdTransform::Kind::AdaptiveQuantile: return "AdaptiveQuantile";
    }
    return "?";
}

ThresholdTransform::Kind kind_from_name(std::string_view s) {
    if (s == "None") return ThresholdTransform::Kind::None;
    if (s == "SignOnly") return ThresholdTransform::Kind::SignOnly;
    if (s == "Fixed") return ThresholdTransform::Kind::Fixed;
    if (s == "AdaptiveQuantile") return ThresholdTransform::Kind::AdaptiveQuantile;
    throw ContractViolation(fmt::format("unknown threshold kind '{}'", s));
}

double transform_value(double s, const ThresholdTransform& t, double cutoff) {
    switch (t.kind) {
        case ThresholdTransform::Kind::None: return s;
        case ThresholdTransform::Kind::SignOnly: return sign(s);
        case ThresholdTransform::Kind::Fixed:
        case ThresholdTransform::Kind::AdaptiveQuantile: return std::fabs(s) > cutoff ? sign(s) : 0.0;
    }
    return s;
}

}  // namespace

std::string_view to_string(Family f) { return kNames.at(static_cast<std::size_t>(f)); }

Family family_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == s) return static_cast<Family>(i);
    }
    throw ContractViolation(fmt::format("unknown workflow family '{}'", s));
}

std::string ThresholdTransform::label() const {
    switch (kind) {
        case Kind::None: return "None";
        case Kind::SignOnly: return "SignOnly";
        case Kind::Fixed: return fmt::format("Fixed({:g})", param);
        case Kind::AdaptiveQuantile: return fmt::format("AdaptiveQuantile({:g})", param);
    }
    return "?";
}

void ThresholdTransform::validate() const {
    if (kind == Kind::AdaptiveQuantile && !(param > 0.0 && param < 1.0)) {
        throw ContractViolation("adaptive quantile q must lie in (0,1)");
    }
    if (kind == Kind::Fixed && !(std::isfinite(param) && param >= 0.0)) {
        throw ContractViolation("fixed threshold must be finite and >= 0");
    }
}

void WorkflowSpec::validate() const {
    if (K < 1) throw ContractViolation("K must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ContractViolation("split_ratio must lie in (0,1)");
    params.transform.validate();
    if (!(params.tau > 0.0)) throw ContractViolation("tau must be > 0");
    switch (family) {
        case Family::RandomBaseline:
        case Family::Lookahead:
        case Family::Contrarian:
        case Family::RegimeDetector:
        case Family::FactorMimic:
            if (K != 1) throw ContractViolation(fmt::format("{} is a single-rule workflow (K=1)", to_string(family)));
            break;
        case Family::CorrelatedFamilySearch:
            if (params.clusters < 1 || params.clusters > K) throw ContractViolation("clusters must lie in [1, K]");
            if (!(params.rho >= 0.0 && params.rho <= 1.0)) throw ContractViolation("rho must lie in [0,1]");
            break;
        case Family::TrendFollowing:
            if (params.trend_lookbacks.empty() || params.trend_thresholds.empty()) {
                throw ContractViolation("TrendFollowing needs a non-empty grid");
            }
            if (K != params.trend_lookbacks.size() * params.trend_thresholds.size()) {
                throw ContractViolation("TrendFollowing K must equal |lookbacks| x |thresholds|");
            }
            for (auto L : params.trend_lookbacks) {
                if (L < 1) throw ContractViolation("lookbacks must be >= 1");
            }
            break;
        default: break;
    }
    if (family == Family::Contrarian && !(params.contrarian_theta > 0.0)) {
        throw ContractViolation("contrarian theta must be > 0");
    }
    if (family == Family::RegimeDetector &&
        (params.regime_window < 2 || !(params.regime_quantile > 0.0 && params.regime_quantile < 1.0))) {
        throw ContractViolation("regime detector needs window >= 2 and quantile in (0,1)");
    }
}

nlohmann::json to_json(const ThresholdTransform& t) {
    return {{"kind", kind_name(t.kind)}, {"param", t.param}};
}

ThresholdTransform transform_from_json(const nlohmann::json& j) {
    ThresholdTransform t;
    t.kind = kind_from_name(j.value("kind", std::string("None")));
    t.param = j.value("param", 0.0);
    t.validate();
    return t;
}

nlohmann::json to_json(const WorkflowSpec& w) {
    const auto& p = w.params;
    return {{"family", std::string(to_string(w.family))},
            {"K", w.K},
            {"split_ratio", w.split_ratio},
            {"seed", w.seed},
            {"params",
             {{"contrarian_theta", p.contrarian_theta},
              {"regime_window", p.regime_window},
              {"regime_quantile", p.regime_quantile},
              {"rho", p.rho},
              {"clusters", p.clusters},
              {"transform", to_json(p.transform)},
              {"trend_lookbacks", p.trend_lookbacks},
              {"trend_thresholds", p.trend_thresholds},
              {"min_trades", p.min_trades},
              {"keff_pred", p.keff_pred},
              {"keff_signal", p.keff_signal},
              {"keff_block", p.keff_block == KeffBlock::InSample ? "InSample" : "WalkForward"},
              {"acknowledge_protocol_violation", p.acknowledge_protocol_violation},
              {"tau", p.tau}}}};
}

WorkflowSpec workflow_from_json(const nlohmann::json& j) {
    WorkflowSpec w;
    w.family = family_from_string(j.at("family").get<std::string>());
    w.K = j.value("K", std::size_t{1});
    w.split_ratio = j.value("split_ratio", 0.6);
    w.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params")) {
        const auto& p = j.at("params");
        auto& q = w.params;
        q.contrarian_theta = p.value("contrarian_theta", q.contrarian_theta);
        q.regime_window = p.value("regime_window", q.regime_window);
        q.regime_quantile = p.value("regime_quantile", q.regime_quantile);
        q.rho = p.value("rho", q.rho);
        q.clusters = p.value("clusters", q.clusters);
        if (p.contains("transform")) {
            q.transform = transform_from_json(p.at("transform"));
        }
        q.trend_lookbacks = p.value("trend_lookbacks", q.trend_lookbacks);
        q.trend_thresholds = p.value("trend_thresholds", q.trend_thresholds);
        q.min_trades = p.value("min_trades", q.min_trades);
        q.keff_pred = p.value("keff_pred", q.keff_pred);
        q.keff_signal = p.value("keff_signal", q.keff_signal);
        const std::string blk = p.value("keff_block", std::string("InSample"));
        if (blk == "InSample") q.keff_block = KeffBlock::InSample;
        else if (blk == "WalkForward") q.keff_block = KeffBlock::WalkForward;
        else throw ContractViolation(fmt::format("unknown keff_block '{}'", blk));
        q.acknowledge_protocol_violation =
            p.value("acknowledge_protocol_violation", q.acknowledge_protocol_violation);
        q.tau = p.value("tau", q.tau);
    }
    w.validate();
    return w;
}

std::uint64_t spec_hash(const WorkflowSpec& w) { return rng::fnv1a(to_json(w).dump()); }

// ---------------------------------------------------------------- split & feed

SplitPath::SplitPath(const env::ReturnPath& path, double split_ratio)
    : r_(path.r),
      n_is_(static_cast<std::size_t>(std::floor(split_ratio * static_cast<double>(path.r.size())))) {
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ContractViolation("split_ratio must lie in (0,1)");
    if (n_is_ < inference::kMinSeriesLength || r_.size() - n_is_ < inference::kMinSeriesLength) {
        throw ContractViolation("path too short for both phases (need >= 8 rows each)");
    }
}

void SplitPath::finalize_selection(std::size_t winner) {
    if (finalized_) throw ProtocolViolation("selection already finalized");
    finalized_ = true;
    winner_ = winner;
}

std::span<const double> SplitPath::full() const {
    if (!finalized_) throw ProtocolViolation("walk-forward data requested before selection was finalized");
    return r_;
}

std::span<const double> SplitPath::walk_forward() const { return full().subspan(n_is_); }

double CausalFeed::lagged(std::size_t t, std::size_t lag) const {
    if (lag == 0) throw ProtocolViolation("causal rules may not read the contemporaneous return");
    return t < lag ? 0.0 : r_[t - lag];
}

SignalRule SignalRule::causal(std::string id, Family family, std::size_t warmup, CausalFn fn) {
    if (family == Family::Lookahead) {
        throw ProtocolViolation("Lookahead must be built through unsafe_lookahead");
    }
    SignalRule r;
    r.id_ = std::move(id);
    r.family_ = family;
    r.warmup_ = warmup;
    r.causal_ = std::move(fn);
    return r;
}

SignalRule SignalRule::unsafe_lookahead(std::string id, std::size_t warmup, UnsafeFn fn,
                                        bool acknowledge_violation) {
    if (!acknowledge_violation) {
        throw ProtocolViolation("Lookahead rule requires an explicit protocol-violation acknowledgement");
    }
    SignalRule r;
    r.id_ = std::move(id);
    r.family_ = Family::Lookahead;
    r.warmup_ = warmup;
    r.unsafe_ = std::move(fn);
    return r;
}

void SignalRule::positions(const CausalFeed& feed, std::span<double> out) const {
    if (out.size() != feed.size()) throw ContractViolation("position buffer must match the feed length");
    if (unsafe_) unsafe_(feed.r_, out);
    else causal_(feed, out);
}

// ------------------------------------------------------------- thresholds

std::vector<double> adaptive_cutoffs(const Eigen::MatrixXd& fit, double q) {
    std::vector<double> cut(static_cast<std::size_t>(fit.cols()));
    std::vector<double> buf(static_cast<std::size_t>(fit.rows()));
    for (Eigen::Index k = 0; k < fit.cols(); ++k) {
        for (Eigen::Index t = 0; t < fit.rows(); ++t) buf[static_cast<std::size_t>(t)] = std::fabs(fit(t, k));
        cut[static_cast<std::size_t>(k)] = stats::quantile_type1(buf, q);
    }
    return cut;
}

void apply_threshold_inplace(Eigen::Ref<Eigen::MatrixXd> block, const ThresholdTransform& t,
                             const std::vector<double>& cutoffs) {
    for (Eigen::Index k = 0; k < block.cols(); ++k) {
        double cut = 0.0;
        if (t.kind == ThresholdTransform::Kind::Fixed) cut = t.param;
        if (t.kind == ThresholdTransform::Kind::AdaptiveQuantile) cut = cutoffs.at(static_cast<std::size_t>(k));
        for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, k) = transform_value(block(i, k), t, cut);
    }
}

Eigen::MatrixXd apply_threshold(const Eigen::MatrixXd& scores, const ThresholdTransform& t, std::size_t n_fit) {
    t.validate();
    std::vector<double> cut;
    if (t.kind == ThresholdTransform::Kind::AdaptiveQuantile) {
        if (n_fit < 1 || n_fit > static_cast<std::size_t>(scores.rows())) {
            throw ContractViolation("adaptive quantile needs 1..T fit rows");
        }
        cut = adaptive_cutoffs(scores.topRows(static_cast<Eigen::Index>(n_fit)), t.param);
    }
    Eigen::MatrixXd out = scores;
    apply_threshold_inplace(out, t, cut);
    return out;
}

// ------------------------------------------------------------- candidates

namespace {

CandidateSet independent_sign_candidates(const WorkflowSpec& spec) {
    CandidateSet cs;
    const std::uint64_t seed = spec.seed;
    cs.rules.reserve(spec.K);
    for (std::size_t k = 0; k < spec.K; ++k) {
        cs.rules.push_back(SignalRule::causal(
            fmt::format("{}[{}]", to_string(spec.family), k), spec.family, 0,
            [seed, k](const CausalFeed&, std::span<double> out) {
                rng::Stream s(rng::derive(seed, kSignTag, k));
                rng::fill_rademacher(s, out.data(), out.size());
            }));
    }
    // Continuous predictor = sign * |N(0,1)|, magnitudes from a separate stream so
    // positions never depend on whether scores were requested.
    const std::size_t K = spec.K;
    cs.scores = [seed, K](std::size_t t0, std::size_t t1) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(t1 - t0), static_cast<Eigen::Index>(K));
        std::vector<double> sg(t1);
        for (std::size_t k = 0; k < K; ++k) {
            rng::Stream s(rng::derive(seed, kSignTag, k));
            rng::fill_rademacher(s, sg.data(), t1);
            rng::Stream mag(rng::derive(seed, kMagTag, k));
            for (std::size_t t = 0; t < t1; ++t) {
                const double a = std::fabs(mag.normal());
                if (t >= t0) m(static_cast<Eigen::Index>(t - t0), static_cast<Eigen::Index>(k)) = sg[t] * a;
            }
        }
        return m;
    };
    return cs;
}

CandidateSet correlated_candidates(const WorkflowSpec& spec, const SplitPath& split) {
    const std::size_t K = spec.K;
    const std::size_t T = split.T();
    const auto& p = spec.params;
    const auto sizes = equal_cluster_sizes(K, p.clusters);

    // Scores are exogenous to returns: S_{t,k} = sqrt(rho) F_{t,c(k)} + sqrt(1-rho) e_{t,k}.
    Eigen::MatrixXd F(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(p.clusters));
    for (std::size_t c = 0; c < p.clusters; ++c) {
        rng::Stream s(rng::derive(spec.seed, kFactorTag, c));
        for (std::size_t t = 0; t < T; ++t) F(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = s.normal();
    }
    auto S = std::make_shared<Eigen::MatrixXd>(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(K));
    const double a = std::sqrt(p.rho);
    const double b = std::sqrt(1.0 - p.rho);
    std::size_t k = 0;
    for (std::size_t c = 0; c < p.clusters; ++c) {
        for (std::size_t j = 0; j < sizes[c]; ++j, ++k) {
            auto col = S->col(static_cast<Eigen::Index>(k));
            if (b > 0.0) {
                rng::Stream s(rng::derive(spec.seed, kIdioTag, k));
                for (std::size_t t = 0; t < T; ++t) {
                    col(static_cast<Eigen::Index>(t)) = a * F(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) + b * s.normal();
                }
            } else {
                col = F.col(static_cast<Eigen::Index>(c));
            }
        }
    }

    std::vector<double> cut;
    if (p.transform.kind == ThresholdTransform::Kind::AdaptiveQuantile) {
        cut = adaptive_cutoffs(S->topRows(static_cast<Eigen::Index>(split.n_is())), p.transform.param);
    }

    CandidateSet cs;
    cs.rules.reserve(K);
    const ThresholdTransform tr = p.transform;
    for (std::size_t kk = 0; kk < K; ++kk) {
        const double c = tr.kind == ThresholdTransform::Kind::Fixed ? tr.param
                         : tr.kind == ThresholdTransform::Kind::AdaptiveQuantile ? cut[kk]
                                                                                  : 0.0;
        cs.rules.push_back(SignalRule::causal(
            fmt::format("CorrelatedFamilySearch[{}]", kk), Family::CorrelatedFamilySearch, 0,
            [S, kk, tr, c](const CausalFeed&, std::span<double> out) {
                const auto col = S->col(static_cast<Eigen::Index>(kk));
                for (std::size_t t = 0; t < out.size(); ++t) {
                    out[t] = transform_value(col(static_cast<Eigen::Index>(t)), tr, c);
                }
            }));
    }
    cs.scores = [S](std::size_t t0, std::size_t t1) -> Eigen::MatrixXd {
        return S->middleRows(static_cast<Eigen::Index>(t0), static_cast<Eigen::Index>(t1 - t0));
    };
    return cs;
}

CandidateSet trend_candidates(const WorkflowSpec& spec, const SplitPath& split) {
    const auto is = split.in_sample();
    const double sd = stats::sd(is.data(), is.size());
    CandidateSet cs;
    for (std::size_t L : spec.params.trend_lookbacks) {
        for (double thr : spec.params.trend_thresholds) {
            const double cut = thr * sd * std::sqrt(static_cast<double>(L));
            cs.rules.push_back(SignalRule::causal(
                fmt::format("TrendFollowing[L={},thr={:g}]", L, thr), Family::TrendFollowing, L,
                [L, cut](const CausalFeed& feed, std::span<double> out) {
                    double m = 0.0;
                    for (std::size_t t = 0; t < out.size(); ++t) {
                        if (t > 0) m += feed.lagged(t, 1);
                        if (t > L) m -= feed.lagged(t, L + 1);
                        out[t] = (t >= L && std::fabs(m) > cut) ? sign(m) : 0.0;
                    }
                }));
        }
    }
    return cs;
}

}  // namespace

CandidateSet build_candidates(const WorkflowSpec& spec, const SplitPath& split) {
    spec.validate();
    const auto is = split.in_sample();
    const auto& p = spec.params;
    switch (spec.family) {
        case Family::RandomBaseline:
        case Family::DataMiner:
        case Family::FeatureMining: return independent_sign_candidates(spec);
        case Family::CorrelatedFamilySearch: return correlated_candidates(spec, split);
        case Family::TrendFollowing: return trend_candidates(spec, split);
        case Family::Lookahead: {
            // The position taken for a period equals the sign of that period's return.
            CandidateSet cs;
            cs.rules.push_back(SignalRule::unsafe_lookahead(
                "Lookahead", 0,
                [](std::span<const double> r, std::span<double> out) {
                    for (std::size_t t = 0; t < out.size(); ++t) out[t] = sign(r[t]);
                },
                p.acknowledge_protocol_violation));
            return cs;
        }
        case Family::Contrarian: {
            const double sd = stats::sd(is.data(), is.size());
            const double scale = p.contrarian_theta / (3.0 * sd);
            CandidateSet cs;
            cs.rules.push_back(SignalRule::causal(
                "Contrarian", Family::Contrarian, 1, [scale](const CausalFeed& feed, std::span<double> out) {
                    for (std::size_t t = 0; t < out.size(); ++t) {
                        out[t] = t == 0 ? 0.0 : std::clamp(-scale * feed.lagged(t, 1), -1.0, 1.0);
                    }
                }));
            return cs;
        }
        case Family::RegimeDetector: {
            const std::size_t w = p.regime_window;
            if (is.size() < w + inference::kMinSeriesLength) {
                throw ContractViolation("in-sample block too short for the regime window");
            }
            auto rolling_sd = [w](const CausalFeed& feed, std::size_t t) {
                const auto h = feed.history(t).last(w);
                return stats::sd(h.data(), h.size());
            };
            std::vector<double> vols;
            const CausalFeed is_feed(is);
            for (std::size_t t = w; t < is.size(); ++t) vols.push_back(rolling_sd(is_feed, t));
            const double cutoff = stats::quantile_type1(vols, p.regime_quantile);
            CandidateSet cs;
            cs.rules.push_back(SignalRule::causal(
                "RegimeDetector", Family::RegimeDetector, w,
                [w, cutoff, rolling_sd](const CausalFeed& feed, std::span<double> out) {
                    for (std::size_t t = 0; t < out.size(); ++t) {
                        out[t] = t < w ? 0.0 : (rolling_sd(feed, t) <= cutoff ? 1.0 : 0.0);
                    }
                }));
            return cs;
        }
        case Family::FactorMimic: {
            CandidateSet cs;
            cs.rules.push_back(SignalRule::causal("FactorMimic", Family::FactorMimic, 0,
                                                  [](const CausalFeed&, std::span<double> out) {
                                                      std::fill(out.begin(), out.end(), 1.0);
                                                  }));
            return cs;
        }
    }
    throw ContractViolation("unhandled workflow family");
}

// ------------------------------------------------------------- selection

SelectionOutcome run_selection(const WorkflowSpec& spec, const env::ReturnPath& path, const RunOptions& opts) {
    SplitPath split(path, spec.split_ratio);
    const CandidateSet cs = build_candidates(spec, split);
    const std::size_t n_is = split.n_is();
    const std::size_t n_wf = split.n_wf();
    const std::size_t T = split.T();

    SelectionOutcome o;
    o.n_is = n_is;
    o.n_wf = n_wf;
    o.protocol_violation = cs.rules.front().violates_protocol();

    const auto is = split.in_sample();
    const CausalFeed is_feed(is);
    std::vector<double> x(n_is);
    std::vector<double> scratch(2 * T);
    const bool trend = spec.family == Family::TrendFollowing;

    double best_abs = -1.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < cs.size(); ++k) {
        const SignalRule& rule = cs.rules[k];
        rule.positions(is_feed, x);
        const std::size_t w = rule.warmup();
        if (n_is < w + inference::kMinSeriesLength) continue;
        if (trend) {
            std::size_t trades = 0;
            for (std::size_t t = w; t < n_is; ++t) trades += x[t] != 0.0;
            if (trades < spec.params.min_trades) continue;
        }
        const auto z = inference::z_of_product(x.data() + w, is.data() + w, n_is - w, scratch.data());
        if (z.degenerate) continue;
        ++o.eligible;
        const double a = std::fabs(z.value);
        if (a > best_abs) {
            best_abs = a;
            best = k;
            o.tie_count = 1;
            o.z_is_signed = z.value;
        } else if (a == best_abs) {
            ++o.tie_count;  // lowest index kept
        }
    }
    if (o.eligible == 0) return o;

    split.finalize_selection(best);
    o.selected = true;
    o.winner_index = best;
    o.z_is_star = best_abs;

    const auto full = split.full();
    const CausalFeed full_feed(full);
    std::vector<double> xf(T);
    cs.rules[best].positions(full_feed, xf);
    const auto zw = inference::z_of_product(xf.data() + n_is, full.data() + n_is, n_wf, scratch.data());
    o.degenerate = zw.degenerate;
    o.z_wf_signed = zw.degenerate ? 0.0 : zw.value;
    o.z_wf_star = std::fabs(o.z_wf_signed);

    const auto d = audit::inflation_diagnostics(o.z_is_star, o.z_wf_star, spec.params.tau);
    o.delta_z = d.delta_z;
    o.bif_raw = d.bif_raw;
    o.bif_stab = d.bif_stab;

    if (opts.keep_wf_positions) {
        o.wf_positions.assign(xf.begin() + static_cast<std::ptrdiff_t>(n_is), xf.end());
        o.last_is_position = xf[n_is - 1];
    }

    const auto& p = spec.params;
    if (p.keff_pred || p.keff_signal) {
        const std::size_t b0 = p.keff_block == KeffBlock::InSample ? 0 : n_is;
        const std::size_t b1 = p.keff_block == KeffBlock::InSample ? n_is : T;
        const auto rows = static_cast<Eigen::Index>(b1 - b0);
        const bool scores_are_signals = spec.family == Family::CorrelatedFamilySearch &&
                                        p.transform.kind == ThresholdTransform::Kind::None;
        auto signal_panel = [&]() {
            Eigen::MatrixXd P(rows, static_cast<Eigen::Index>(cs.size()));
            std::vector<double> buf(T);
            for (std::size_t k = 0; k < cs.size(); ++k) {
                cs.rules[k].positions(full_feed, buf);
                for (Eigen::Index i = 0; i < rows; ++i) P(i, static_cast<Eigen::Index>(k)) = buf[b0 + static_cast<std::size_t>(i)];
            }
            return P;
        };
        std::optional<multiplicity::EffectiveMultiplicity> pred;
        if (p.keff_pred || (p.keff_signal && scores_are_signals)) {
            pred = cs.scores ? multiplicity::estimate_k_eff(cs.scores(b0, b1))
                             : multiplicity::estimate_k_eff(signal_panel());
        }
        if (p.keff_pred) {
            o.k_eff_pred = pred->k_eff;
            o.lambda_pred = pred->shrinkage_lambda;
        }
        if (p.keff_signal) {
            const auto sig = scores_are_signals ? *pred : multiplicity::estimate_k_eff(signal_panel());
            o.k_eff_signal = sig.k_eff;
            o.lambda_signal = sig.shrinkage_lambda;
        }
    }
    return o;
}

nlohmann::json to_json(const SelectionOutcome& o) {
    auto opt = [](const std::optional<double>& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"selected", o.selected},
            {"winner_index", o.winner_index},
            {"tie_count", o.tie_count},
            {"eligible", o.eligible},
            {"z_is_star", o.z_is_star},
            {"z_wf_star", o.z_wf_star},
            {"z_is_signed", o.z_is_signed},
            {"z_wf_signed", o.z_wf_signed},
            {"delta_z", o.delta_z},
            {"bif_raw", opt(o.bif_raw)},
            {"bif_stab", o.bif_stab},
            {"k_eff_pred", opt(o.k_eff_pred)},
            {"k_eff_signal", opt(o.k_eff_signal)},
            {"n_is", o.n_is},
            {"n_wf", o.n_wf},
            {"degenerate", o.degenerate},
            {"protocol_violation", o.protocol_violation}};
}

std::string outcome_csv_header() {
    return "selected,winner_index,tie_count,z_is_star,z_wf_star,delta_z,bif_raw,bif_stab,k_eff_pred,k_eff_signal,n_is,n_wf,degenerate";
}

std::string outcome_csv_row(const SelectionOutcome& o) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.10g}", *v) : std::string("NA"); };
    return fmt::format("{},{},{},{:.10g},{:.10g},{:.10g},{},{:.10g},{},{},{},{},{}", o.selected ? 1 : 0, o.winner_index,
                       o.tie_count, o.z_is_star, o.z_wf_star, o.delta_z, opt(o.bif_raw), o.bif_stab, opt(o.k_eff_pred),
                       opt(o.k_eff_signal), o.n_is, o.n_wf, o.degenerate ? 1 : 0);
}

}  // namespace nullaudit::workflows
