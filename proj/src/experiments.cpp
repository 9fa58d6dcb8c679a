#include "nullaudit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "nullaudit/audit.hpp"
#include "nullaudit/breakeven.hpp"
#include "nullaudit/errors.hpp"
#include "nullaudit/inference.hpp"
#include "nullaudit/multiplicity.hpp"
#include "nullaudit/parallel.hpp"
#include "nullaudit/rng.hpp"
#include "nullaudit/stats.hpp"
#include "nullaudit/workflows.hpp"

namespace nullaudit::experiments {

using json = nlohmann::json;
using report::Interval;
using workflows::SelectionOutcome;
using workflows::WorkflowSpec;

namespace {

constexpr double kCritical = 1.959963984540054;
constexpr double kGate = 0.5;

struct Named {
    Experiment e;
    const char* name;
};

constexpr Named kNames[] = {
    {Experiment::ScalingLaw, "ScalingLaw"},
    {Experiment::RedundancyLaw, "RedundancyLaw"},
    {Experiment::RedundancyImperfect, "RedundancyImperfect"},
    {Experiment::CapacityInflation, "CapacityInflation"},
    {Experiment::ThresholdAmplification, "ThresholdAmplification"},
    {Experiment::FalsificationMatrix, "FalsificationMatrix"},
    {Experiment::DetectionFrontier, "DetectionFrontier"},
    {Experiment::BreakEvenCost, "BreakEvenCost"},
    {Experiment::KeffValidation, "KeffValidation"},
    {Experiment::SplitSensitivity, "SplitSensitivity"},
};

// Per-cell reduction of replication outcomes, in replication order.
struct Summary {
    std::vector<double> z_is, z_wf, delta, bif_gated, k_pred, k_sig;
    std::size_t is_fail = 0;
    std::size_t wf_fail = 0;
    std::size_t n = 0;
};

Summary summarize(const std::vector<SelectionOutcome>& v) {
    Summary s;
    s.n = v.size();
    for (const auto& o : v) {
        s.z_is.push_back(o.z_is_star);
        s.z_wf.push_back(o.z_wf_star);
        s.delta.push_back(o.delta_z);
        if (o.selected && o.z_wf_star >= kGate) s.bif_gated.push_back(o.bif_stab);
        if (o.k_eff_pred) s.k_pred.push_back(*o.k_eff_pred);
        if (o.k_eff_signal) s.k_sig.push_back(*o.k_eff_signal);
        if (o.z_is_star > kCritical) ++s.is_fail;
        if (o.z_wf_star > kCritical) ++s.wf_fail;
    }
    return s;
}

std::vector<SelectionOutcome> run_reps(const WorkflowSpec& w, const audit::NullEnvironment& e, std::size_t env_index,
                                       std::uint64_t master, std::size_t N, std::size_t workers) {
    std::vector<SelectionOutcome> out(N);
    parallel::for_each_index(N, workers, [&](std::size_t i) {
        out[i] = audit::run_replication(w, e, env_index, master, i);
    });
    return out;
}

audit::NullEnvironment null_env(env::Family f, std::size_t T) {
    return {std::string(env::to_string(f)), env::default_spec(f, T), std::nullopt};
}

// A cell that throws becomes a failed row; the run continues.
template <class F>
void guarded(report::ResultTable& t, const std::string& key, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        spdlog::error("{}: cell {} failed: {}", t.name, key, e.what());
        t.add_failed(key, e.what());
    }
}

report::Row make_row(std::string key, std::vector<report::Cell> cells) {
    report::Row r;
    r.key = std::move(key);
    r.cells = std::move(cells);
    return r;
}

report::ResultTable make_table(std::string name, std::string title, std::vector<report::Column> cols) {
    report::ResultTable t;
    t.name = std::move(name);
    t.title = std::move(title);
    t.columns = std::move(cols);
    json schema = json::array();
    for (const auto& c : t.columns) schema.push_back({{"column", c.name}, {"interval", report::interval_name(c.interval)}});
    t.metadata["schema"] = schema;
    t.metadata["bif_gate"] = kGate;
    return t;
}

double evt_at(double m) { return inference::evt_expected_max(std::max(2.0, m)); }

std::string fmt_level(double v) { return fmt::format("{:.2f}", v); }

WorkflowSpec base_workflow(workflows::Family f, std::size_t K, double split) {
    WorkflowSpec w;
    w.family = f;
    w.K = K;
    w.split_ratio = split;
    return w;
}

WorkflowSpec tuning_workflow(std::size_t K, const json& tuning, double split) {
    WorkflowSpec w = base_workflow(workflows::Family::CorrelatedFamilySearch, K, split);
    w.params.clusters = tuning.at("clusters").get<std::size_t>();
    w.params.rho = tuning.at("rho").get<double>();
    w.params.transform = workflows::transform_from_json(tuning.at("transform"));
    w.params.keff_signal = true;
    return w;
}

std::string regime_label(std::size_t clusters, std::size_t K) {
    if (clusters == 1) return "Perfectly Correlated";
    if (clusters == K) return "Independent";
    return fmt::format("{} Clusters", clusters);
}

// ---------------------------------------------------------------------------

void scaling_law(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    auto t = make_table("scaling_law", "Selection bias versus nominal search width (WhiteNoise, DataMiner)",
                        {{"K"},
                         {"Mean Z_IS*", Interval::NormalMean},
                         {"Mean Z_WF*", Interval::NormalMean},
                         {"Delta Z", Interval::NormalMean},
                         {"BIF_stab_0.5", Interval::OrderStatistic},
                         {"Winner FWP (%)", Interval::WaldRate},
                         {"n"}});
    const auto e = null_env(env::Family::WhiteNoise, s.length_T);
    const auto Ks = g.at("K").get<std::vector<std::size_t>>();
    for (std::size_t c = 0; c < Ks.size(); ++c) {
        const std::string key = fmt::format("K={}", Ks[c]);
        guarded(t, key, [&] {
            const auto w = base_workflow(workflows::Family::DataMiner, Ks[c], s.split_ratio);
            const auto m = summarize(run_reps(w, e, 0, cell_seed(s, c), s.N, s.workers));
            t.rows.push_back(make_row(key, {report::label(std::to_string(Ks[c])), report::mean_cell(m.z_is),
                                            report::mean_cell(m.z_wf), report::mean_cell(m.delta),
                                            report::median_cell(m.bif_gated), report::rate_cell(m.is_fail, m.n),
                                            report::number(static_cast<double>(m.n))}));
        });
    }
    t.metadata["environment"] = env::to_json(e.spec);
    out.tables.push_back(std::move(t));
}

void redundancy_law(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto K = g.at("K").get<std::size_t>();
    const auto clusters = g.at("clusters").get<std::vector<std::size_t>>();
    auto t = make_table("redundancy_law", fmt::format("Redundancy law: K={} clustered nulls (rho=1)", K),
                        {{"Dependence Regime"},
                         {"K_eff", Interval::NormalMean},
                         {"E[|Z_IS*|]", Interval::NormalMean},
                         {"EVT(2K)"},
                         {"EVT(2K_eff)"},
                         {"Ratio"},
                         {"Independence Proxy"},
                         {"BIF_stab_0.5", Interval::OrderStatistic},
                         {"E[Z_WF*]", Interval::NormalMean}});
    const auto e = null_env(env::Family::WhiteNoise, s.length_T);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const std::string key = regime_label(clusters[c], K);
        guarded(t, key, [&] {
            auto w = base_workflow(workflows::Family::CorrelatedFamilySearch, K, s.split_ratio);
            w.params.rho = 1.0;
            w.params.clusters = clusters[c];
            w.params.keff_pred = true;
            const auto m = summarize(run_reps(w, e, 0, cell_seed(s, c), s.N, s.workers));
            const double keff = stats::mean(m.k_pred);
            const double obs = stats::mean(m.z_is);
            const double pred = evt_at(2.0 * keff);
            const double proxy = K > 1 ? (keff - 1.0) / static_cast<double>(K - 1) : 0.0;
            t.rows.push_back(make_row(
                key, {report::label(key), report::mean_cell(m.k_pred), report::mean_cell(m.z_is),
                      report::number(evt_at(2.0 * static_cast<double>(K))), report::number(pred),
                      report::number(obs / pred), report::number(proxy), report::median_cell(m.bif_gated),
                      report::mean_cell(m.z_wf)}));
        });
    }
    out.tables.push_back(std::move(t));
}

void redundancy_imperfect(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto K = g.at("K").get<std::size_t>();
    const auto rhos = g.at("rho").get<std::vector<double>>();
    const auto clusters = g.at("clusters").get<std::vector<std::size_t>>();
    auto t = make_table("redundancy_imperfect", fmt::format("EVT benchmark under imperfect correlation (K={})", K),
                        {{"rho"},
                         {"Clusters"},
                         {"K_eff", Interval::NormalMean},
                         {"Obs. E[|Z_IS*|]", Interval::NormalMean},
                         {"Pred. (EVT)"},
                         {"Error %"}});
    const auto e = null_env(env::Family::WhiteNoise, s.length_T);
    std::size_t cell = 0;
    for (double rho : rhos) {
        for (std::size_t c : clusters) {
            const std::size_t id = cell++;
            const std::string key = fmt::format("rho={},clusters={}", rho, c);
            guarded(t, key, [&] {
                auto w = base_workflow(workflows::Family::CorrelatedFamilySearch, K, s.split_ratio);
                w.params.rho = rho;
                w.params.clusters = c;
                w.params.keff_pred = true;
                const auto m = summarize(run_reps(w, e, 0, cell_seed(s, id), s.N, s.workers));
                const double obs = stats::mean(m.z_is);
                const double pred = evt_at(2.0 * stats::mean(m.k_pred));
                t.rows.push_back(make_row(key, {report::label(fmt_level(rho)), report::number(static_cast<double>(c)),
                                                report::mean_cell(m.k_pred), report::mean_cell(m.z_is),
                                                report::number(pred), report::number((obs - pred) / pred * 100.0)}));
            });
        }
    }
    out.tables.push_back(std::move(t));
}

void capacity_inflation(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto K = g.at("K").get<std::size_t>();
    auto t = make_table("capacity_inflation", fmt::format("Workflow comparison under WhiteNoise at K={}", K),
                        {{"Workflow"},
                         {"K_eff", Interval::Spread},
                         {"Mean Z_IS*", Interval::Spread},
                         {"Mean Z_WF*", Interval::Spread},
                         {"Delta Z", Interval::Spread},
                         {"BIF_stab_0.5", Interval::OrderStatistic},
                         {"IS Fail (%)", Interval::WaldRate},
                         {"WF Fail (%)", Interval::WaldRate}});
    const auto e = null_env(env::Family::WhiteNoise, s.length_T);

    std::vector<std::pair<std::string, WorkflowSpec>> arms;
    {
        auto w = base_workflow(workflows::Family::FeatureMining, K, s.split_ratio);
        w.params.keff_signal = true;
        arms.emplace_back("FeatureMining", w);
    }
    arms.emplace_back("HyperparameterTuning", tuning_workflow(K, g.at("tuning"), s.split_ratio));
    {
        const auto lbs = g.at("trend_lookbacks").get<std::vector<std::size_t>>();
        const auto thr = g.at("trend_thresholds").get<std::vector<double>>();
        auto w = base_workflow(workflows::Family::TrendFollowing, lbs.size() * thr.size(), s.split_ratio);
        w.params.trend_lookbacks = lbs;
        w.params.trend_thresholds = thr;
        w.params.keff_signal = true;
        arms.emplace_back("TrendFollowing", w);
    }
    t.metadata["arms"] = json::object();
    for (std::size_t c = 0; c < arms.size(); ++c) {
        const auto& [key, w] = arms[c];
        t.metadata["arms"][key] = workflows::to_json(w);
        guarded(t, key, [&] {
            const auto m = summarize(run_reps(w, e, 0, cell_seed(s, c), s.N, s.workers));
            t.rows.push_back(make_row(key, {report::label(key), report::mean_spread_cell(m.k_sig),
                                            report::mean_spread_cell(m.z_is), report::mean_spread_cell(m.z_wf),
                                            report::mean_spread_cell(m.delta), report::median_cell(m.bif_gated),
                                            report::rate_cell(m.is_fail, m.n), report::rate_cell(m.wf_fail, m.n)}));
        });
    }
    out.tables.push_back(std::move(t));
}

void threshold_amplification(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto Ks = g.at("K").get<std::vector<std::size_t>>();
    const double rho = g.at("rho").get<double>();
    const auto block = g.at("keff_block").get<std::string>();
    std::vector<workflows::ThresholdTransform> transforms;
    for (const auto& j : g.at("transforms")) transforms.push_back(workflows::transform_from_json(j));
    if (transforms.empty()) throw ContractViolation("threshold experiment needs at least one transform");
    if (block != "InSample" && block != "WalkForward") throw ContractViolation("keff_block must be InSample or WalkForward");

    auto t = make_table("threshold_amplification", fmt::format("Threshold amplification (rho={})", rho),
                        {{"Threshold Type"},
                         {"Level"},
                         {"K"},
                         {"K_eff (Pred)", Interval::NormalMean},
                         {"K_eff (Signal)", Interval::NormalMean},
                         {"Amp. Factor"},
                         {"Mean |Z_IS*|", Interval::NormalMean},
                         {"|Z_IS| 5%"},
                         {"|Z_IS| 95%"},
                         {"Mean |Z_WF*|", Interval::NormalMean}});
    const auto e = null_env(env::Family::WhiteNoise, s.length_T);
    using Kind = workflows::ThresholdTransform::Kind;
    for (std::size_t kc = 0; kc < Ks.size(); ++kc) {
        // Same seed for every transform: the scores are paired and K_eff(pred)
        // is computed once, on the first transform's run.
        std::vector<double> k_pred;
        for (std::size_t ti = 0; ti < transforms.size(); ++ti) {
            const auto& tr = transforms[ti];
            const std::string key = fmt::format("K={},{}", Ks[kc], tr.label());
            guarded(t, key, [&] {
                auto w = base_workflow(workflows::Family::CorrelatedFamilySearch, Ks[kc], s.split_ratio);
                w.params.rho = rho;
                w.params.clusters = 1;
                w.params.transform = tr;
                w.params.keff_block =
                    block == "InSample" ? workflows::KeffBlock::InSample : workflows::KeffBlock::WalkForward;
                w.params.keff_pred = k_pred.empty() || tr.kind == Kind::None;
                w.params.keff_signal = tr.kind != Kind::None;
                const auto m = summarize(run_reps(w, e, 0, cell_seed(s, kc), s.N, s.workers));
                if (k_pred.empty()) k_pred = m.k_pred;
                const auto& sig = tr.kind == Kind::None ? m.k_pred : m.k_sig;
                const auto zs = m.z_is;
                std::string type = "None", level = "--";
                if (tr.kind == Kind::Fixed) {
                    type = "Fixed";
                    level = fmt::format("thr={:.1f}", tr.param);
                } else if (tr.kind == Kind::AdaptiveQuantile) {
                    type = "Adaptive";
                    level = fmt::format("q={:.2f}", tr.param);
                } else if (tr.kind == Kind::SignOnly) {
                    type = "SignOnly";
                }
                t.rows.push_back(make_row(
                    key, {report::label(type), report::label(level), report::number(static_cast<double>(Ks[kc])),
                          report::mean_cell(k_pred), report::mean_cell(sig),
                          report::number(stats::mean(sig) / stats::mean(k_pred)), report::mean_cell(m.z_is),
                          report::number(stats::quantile_type1(zs, 0.05)),
                          report::number(stats::quantile_type1(zs, 0.95)), report::mean_cell(m.z_wf)}));
            });
        }
    }
    t.metadata["keff_block"] = block;
    out.tables.push_back(std::move(t));
}

std::string env_display(env::Family f) {
    return f == env::Family::MA1Placebo ? "Microstructure" : std::string(env::to_string(f));
}

void falsification_matrix(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto pipelines = g.at("pipelines").get<std::vector<std::string>>();
    const auto env_names = g.at("environments").get<std::vector<std::string>>();
    const auto dmK = g.at("data_miner_K").get<std::size_t>();
    const double flag_rate = g.at("flag_rate").get<double>();

    auto cells = make_table("falsification_cells", "Falsification diagnostics by pipeline and environment",
                            {{"Pipeline"},
                             {"Environment"},
                             {"Mean |Z_WF|", Interval::NormalMean},
                             {"WF Fail (%)", Interval::WaldRate},
                             {"Mean |Z_IS|", Interval::NormalMean},
                             {"IS Fail (%)", Interval::WaldRate},
                             {"BIF_stab_0.5", Interval::OrderStatistic}});
    auto cls = make_table("falsification_classification", "Rule-based pipeline diagnosis",
                          {{"Pipeline"}, {"WF Fail (Mean)"}, {"IS Fail (Mean)"}, {"Max |Z| (WF)"}, {"Diagnosis"}});

    std::vector<env::Family> fams;
    for (const auto& n : env_names) fams.push_back(env::family_from_string(n));
    // Paths depend on (environment, replication) only, so every pipeline sees the same data.
    const std::uint64_t master = cell_seed(s, 0);

    for (const auto& p : pipelines) {
        const auto fam = workflows::family_from_string(p);
        auto w = base_workflow(fam, fam == workflows::Family::DataMiner ? dmK : 1, s.split_ratio);
        w.params.acknowledge_protocol_violation = fam == workflows::Family::Lookahead;
        std::vector<double> wf_rates, is_rates, wf_means;
        std::size_t flagged = 0;
        bool pipeline_failed = false;
        for (std::size_t ei = 0; ei < fams.size(); ++ei) {
            const std::string key = fmt::format("{}/{}", p, env_display(fams[ei]));
            const std::size_t before = cells.rows.size();
            guarded(cells, key, [&] {
                const auto e = null_env(fams[ei], s.length_T);
                const auto m = summarize(run_reps(w, e, ei, master, s.N, s.workers));
                const auto wf = report::rate_cell(m.wf_fail, m.n);
                const auto is = report::rate_cell(m.is_fail, m.n);
                cells.rows.push_back(make_row(key, {report::label(p), report::label(env_display(fams[ei])),
                                                    report::mean_cell(m.z_wf), wf, report::mean_cell(m.z_is), is,
                                                    report::median_cell(m.bif_gated)}));
                wf_rates.push_back(wf.value);
                is_rates.push_back(is.value);
                wf_means.push_back(stats::mean(m.z_wf));
                if (wf.value > flag_rate) ++flagged;
            });
            if (cells.rows.size() > before && cells.rows.back().failed) pipeline_failed = true;
        }
        if (pipeline_failed || wf_rates.empty()) {
            cls.add_failed(p, "one or more environment cells failed");
            continue;
        }
        std::string diagnosis = "Robust (Passes WF)";
        if (flagged == wf_rates.size()) diagnosis = "Universal Failure (WF)";
        else if (flagged > 0) diagnosis = "Severe Methodological Error";
        else if (stats::mean(is_rates) > 50.0) diagnosis = "Selection Bias (IS-only)";
        cls.rows.push_back(make_row(p, {report::label(p), report::number(stats::mean(wf_rates)),
                                        report::number(stats::mean(is_rates)),
                                        report::number(*std::max_element(wf_means.begin(), wf_means.end())),
                                        report::label(diagnosis)}));
    }
    cls.metadata["rule"] = fmt::format(
        "an environment is flagged when its WF failure rate exceeds {}%; all flagged: Universal Failure (WF); "
        "some flagged: Severe Methodological Error; none flagged and mean IS failure > 50%: Selection Bias "
        "(IS-only); otherwise Robust (Passes WF)",
        flag_rate);
    cells.metadata["data_miner_K"] = dmK;
    out.tables.push_back(std::move(cells));
    out.tables.push_back(std::move(cls));
}

void detection_frontier(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto phis = g.at("phi").get<std::vector<double>>();
    const auto thetas = g.at("theta").get<std::vector<double>>();
    std::vector<report::Column> cols = {{"Signal phi"}};
    for (double th : thetas) cols.push_back({fmt::format("theta={:.1f}", th), Interval::WaldRate});
    auto t = make_table("detection_frontier", "Detection limits: pass rate (%) by signal strength and activation threshold",
                        cols);
    auto w = base_workflow(workflows::Family::TrendFollowing, 0, s.split_ratio);
    w.params.trend_lookbacks = {1};
    w.params.trend_thresholds = g.at("thresholds").get<std::vector<double>>();
    w.params.min_trades = g.at("min_trades").get<std::size_t>();
    w.K = w.params.trend_thresholds.size();
    t.metadata["workflow"] = workflows::to_json(w);
    t.metadata["pass_rule"] = "selected and |Z_WF| > 1.96";
    for (std::size_t pi = 0; pi < phis.size(); ++pi) {
        const std::string key = fmt::format("phi={:.2f}", phis[pi]);
        guarded(t, key, [&] {
            std::vector<report::Cell> row = {report::label(fmt_level(phis[pi]))};
            for (std::size_t ti = 0; ti < thetas.size(); ++ti) {
                auto spec = env::default_spec(env::Family::TarPositive, s.length_T);
                auto p = std::get<env::TarParams>(spec.params);
                p.phi = phis[pi];
                p.theta_act = thetas[ti];
                spec.params = p;
                const audit::NullEnvironment e{"TarPositive", spec, std::nullopt};
                const auto v = run_reps(w, e, 0, cell_seed(s, pi * thetas.size() + ti), s.N, s.workers);
                std::size_t pass = 0;
                for (const auto& o : v) {
                    if (o.selected && std::fabs(o.z_wf_signed) > kCritical) ++pass;
                }
                row.push_back(report::rate_cell(pass, v.size()));
            }
            t.rows.push_back(make_row(key, std::move(row)));
        });
    }
    out.tables.push_back(std::move(t));
}

void breakeven_cost(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    breakeven::TrendDgp dgp;
    dgp.p_stay = g.at("p_stay").get<double>();
    dgp.drift_mult = g.at("drift_mult").get<double>();
    dgp.sigma_ann = g.at("sigma_ann").get<double>();
    dgp.length_T = s.length_T;
    dgp.validate();
    const double screen = g.at("screen").get<double>();
    auto w = base_workflow(workflows::Family::TrendFollowing, 0, s.split_ratio);
    w.params.trend_lookbacks = g.at("lookbacks").get<std::vector<std::size_t>>();
    w.params.trend_thresholds = {0.0};
    w.params.min_trades = g.at("min_trades").get<std::size_t>();
    w.K = w.params.trend_lookbacks.size();

    auto t = make_table("breakeven_cost", "Transaction cost mechanics on screened walk-forward paths",
                        {{"Metric"}, {"Mean", Interval::NormalMean}, {"Median"}, {"5%"}, {"95%"}, {"n"}});
    t.metadata["workflow"] = workflows::to_json(w);
    t.metadata["dgp"] = {{"p_stay", dgp.p_stay}, {"drift_mult", dgp.drift_mult}, {"sigma_ann", dgp.sigma_ann},
                         {"length_T", dgp.length_T}};
    t.metadata["screen"] = fmt::format("selected and Z_WF (signed) >= {}", screen);

    const std::uint64_t master = cell_seed(s, 0);
    struct Rep {
        bool pass = false;
        bool traded = false;
        double v1 = 0.0;
        double bps = 0.0;
    };
    std::vector<Rep> reps(s.N);
    const std::string key = "all";
    try {
        parallel::for_each_index(s.N, s.workers, [&](std::size_t i) {
            const auto path = breakeven::simulate_trend(dgp, rng::derive(master, 0, i));
            auto wi = w;
            wi.seed = rng::derive(master, 1, i);
            const auto o = workflows::run_selection(wi, path, {true});
            Rep r;
            r.pass = o.selected && o.z_wf_signed >= screen;
            if (r.pass) {
                const std::span<const double> rw(path.r.data() + o.n_is, o.n_wf);
                const auto be = breakeven::breakeven_cost(o.wf_positions, rw, o.last_is_position);
                if (!be.no_trading && be.cost_bps) {
                    r.traded = true;
                    r.v1 = be.v1_ann;
                    r.bps = *be.cost_bps;
                }
            }
            reps[i] = r;
        });
    } catch (const std::exception& e) {
        spdlog::error("breakeven_cost failed: {}", e.what());
        t.add_failed(key, e.what());
        out.tables.push_back(std::move(t));
        return;
    }
    std::size_t pass = 0;
    std::vector<double> v1, bps;
    for (const auto& r : reps) {
        pass += r.pass;
        if (r.traded) {
            v1.push_back(r.v1);
            bps.push_back(r.bps);
        }
    }
    const auto dist_row = [&](const std::string& name, const std::vector<double>& x) {
        if (x.empty()) return make_row(name, {report::label(name), report::na(), report::na(), report::na(),
                                              report::na(), report::number(0.0)});
        return make_row(name, {report::label(name), report::mean_cell(x), report::number(stats::median(x)),
                               report::number(stats::quantile_type1(x, 0.05)),
                               report::number(stats::quantile_type1(x, 0.95)),
                               report::number(static_cast<double>(x.size()))});
    };
    t.rows.push_back(make_row("Screen Pass Rate (%)",
                              {report::label("Screen Pass Rate (%)"), report::rate_cell(pass, s.N), report::na(),
                               report::na(), report::na(), report::number(static_cast<double>(s.N))}));
    t.rows.push_back(dist_row("Ann. Turnover (1-Way)", v1));
    t.rows.push_back(dist_row("Break-Even Cost (bps)", bps));
    out.tables.push_back(std::move(t));
}

struct KeffRep {
    double truth = 0.0;
    double shrink = 0.0;
    double sample = 0.0;
    double lambda = 0.0;
};

// Independent columns (factors == 0) or a fresh m-factor loading draw per replication.
KeffRep keff_rep(std::size_t K, std::size_t T, std::size_t factors, std::uint64_t seed) {
    rng::Stream st(seed);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(K));
    KeffRep r;
    if (factors == 0) {
        for (Eigen::Index k = 0; k < X.cols(); ++k)
            for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, k) = st.normal();
        r.truth = static_cast<double>(K);
    } else {
        const auto m = static_cast<Eigen::Index>(factors);
        Eigen::MatrixXd B(static_cast<Eigen::Index>(K), m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index k = 0; k < B.rows(); ++k) B(k, j) = st.normal();
        Eigen::MatrixXd F(static_cast<Eigen::Index>(T), m);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < F.rows(); ++i) F(i, j) = st.normal();
        X = F * B.transpose();
        for (Eigen::Index k = 0; k < X.cols(); ++k)
            for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, k) += st.normal();
        Eigen::MatrixXd C = B * B.transpose();
        C.diagonal().array() += 1.0;
        const Eigen::VectorXd d = C.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd R = d.asDiagonal() * C * d.asDiagonal();
        Eigen::MatrixXd Rs = 0.5 * (R + R.transpose());
        Rs.diagonal().setOnes();
        r.truth = multiplicity::k_eff(Rs).k_eff;
    }
    const auto sh = multiplicity::estimate_k_eff(X);
    r.shrink = sh.k_eff;
    r.lambda = sh.shrinkage_lambda;
    r.sample = multiplicity::sample_k_eff(X).k_eff;
    return r;
}

void keff_validation(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    auto t = make_table("keff_validation", "Shrinkage versus sample K_eff estimator",
                        {{"Scenario"},
                         {"K"},
                         {"T"},
                         {"Bias (Shrink)", Interval::NormalMean},
                         {"RMSE (Shrink)"},
                         {"lambda", Interval::NormalMean},
                         {"Bias (Sample)", Interval::NormalMean},
                         {"RMSE (Sample)"},
                         {"True K_eff"}});
    const auto& scenarios = g.at("scenarios");
    for (std::size_t c = 0; c < scenarios.size(); ++c) {
        const auto& sc = scenarios[c];
        const auto name = sc.at("name").get<std::string>();
        const auto K = sc.at("K").get<std::size_t>();
        const auto T = sc.at("T").get<std::size_t>();
        const auto m = sc.value("factors", std::size_t{0});
        const std::string key = fmt::format("{} K={} T={}", name, K, T);
        guarded(t, key, [&] {
            if (K < 2 || T < 2) throw ContractViolation("K_eff validation needs K >= 2 and T >= 2");
            const std::uint64_t seed = cell_seed(s, c);
            std::vector<KeffRep> reps(s.N);
            parallel::for_each_index(s.N, s.workers, [&](std::size_t i) { reps[i] = keff_rep(K, T, m, rng::derive(seed, i)); });
            std::vector<double> es, ss, lam, truth;
            double mse_s = 0.0, mse_n = 0.0;
            for (const auto& r : reps) {
                es.push_back(r.shrink - r.truth);
                ss.push_back(r.sample - r.truth);
                lam.push_back(r.lambda);
                truth.push_back(r.truth);
                mse_s += es.back() * es.back();
                mse_n += ss.back() * ss.back();
            }
            const double n = static_cast<double>(reps.size());
            t.rows.push_back(make_row(key, {report::label(name), report::number(static_cast<double>(K)),
                                            report::number(static_cast<double>(T)), report::mean_cell(es),
                                            report::number(std::sqrt(mse_s / n)), report::mean_cell(lam),
                                            report::mean_cell(ss), report::number(std::sqrt(mse_n / n)),
                                            report::number(stats::mean(truth))}));
        });
    }
    out.tables.push_back(std::move(t));
}

void split_sensitivity(const ExperimentSpec& s, const json& g, ExperimentResult& out) {
    const auto K = g.at("K").get<std::size_t>();
    const auto splits = g.at("splits").get<std::vector<double>>();
    auto t = make_table("split_sensitivity", fmt::format("Split sensitivity under WhiteNoise (tuning surrogate, K={})", K),
                        {{"Split"},
                         {"K_eff", Interval::NormalMean},
                         {"|Z_IS|", Interval::NormalMean},
                         {"|Z_WF|", Interval::NormalMean},
                         {"Delta Z", Interval::NormalMean},
                         {"Fail %", Interval::WaldRate},
                         {"BIF", Interval::OrderStatistic}});
    const auto e = null_env(env::Family::WhiteNoise, s.length_T);
    // Paired paths across splits: one seed for the whole experiment.
    const std::uint64_t master = cell_seed(s, 0);
    for (double sp : splits) {
        const std::string key = fmt::format("Split {:.1f}", sp);
        guarded(t, key, [&] {
            const auto w = tuning_workflow(K, g.at("tuning"), sp);
            const auto m = summarize(run_reps(w, e, 0, master, s.N, s.workers));
            t.rows.push_back(make_row(key, {report::label(key), report::mean_cell(m.k_sig), report::mean_cell(m.z_is),
                                            report::mean_cell(m.z_wf), report::mean_cell(m.delta),
                                            report::rate_cell(m.wf_fail, m.n), report::median_cell(m.bif_gated)}));
        });
    }
    t.metadata["workflow"] = workflows::to_json(tuning_workflow(K, g.at("tuning"), s.split_ratio));
    out.tables.push_back(std::move(t));
}

json tuning_default() {
    return {{"clusters", 1}, {"rho", 0.9}, {"transform", {{"kind", "SignOnly"}, {"param", 0.0}}}};
}

}  // namespace

std::string_view to_string(Experiment e) {
    for (const auto& n : kNames) {
        if (n.e == e) return n.name;
    }
    return "?";
}

Experiment experiment_from_string(std::string_view s) {
    for (const auto& n : kNames) {
        if (s == n.name) return n.e;
    }
    throw ContractViolation(fmt::format("unknown experiment '{}'", s));
}

const std::vector<Experiment>& all_experiments() {
    static const std::vector<Experiment> all = [] {
        std::vector<Experiment> v;
        for (const auto& n : kNames) v.push_back(n.e);
        return v;
    }();
    return all;
}

json default_grid(Experiment e) {
    switch (e) {
        case Experiment::ScalingLaw:
            return {{"K", {1, 5, 10, 50, 100, 200, 500, 1000}}};
        case Experiment::RedundancyLaw:
            return {{"K", 500}, {"clusters", {1, 5, 10, 25, 50, 100, 500}}};
        case Experiment::RedundancyImperfect:
            return {{"K", 500}, {"rho", {0.6, 0.8, 0.99}}, {"clusters", {1, 5, 10, 25, 50, 100, 500}}};
        case Experiment::CapacityInflation: {
            std::vector<std::size_t> lbs;
            for (std::size_t l = 1; l <= 25; ++l) lbs.push_back(l);
            return {{"K", 400},
                    {"tuning", tuning_default()},
                    {"trend_lookbacks", lbs},
                    {"trend_thresholds", workflows::FamilyParams{}.trend_thresholds}};
        }
        case Experiment::ThresholdAmplification:
            return {{"K", {1000}},
                    {"rho", 0.9},
                    {"keff_block", "WalkForward"},
                    {"transforms",
                     {{{"kind", "None"}, {"param", 0.0}},
                      {{"kind", "Fixed"}, {"param", 1.0}},
                      {{"kind", "Fixed"}, {"param", 2.0}},
                      {{"kind", "AdaptiveQuantile"}, {"param", 0.5}},
                      {{"kind", "AdaptiveQuantile"}, {"param", 0.9}},
                      {{"kind", "AdaptiveQuantile"}, {"param", 0.95}}}}};
        case Experiment::FalsificationMatrix:
            return {{"pipelines",
                     {"RandomBaseline", "DataMiner", "Contrarian", "Lookahead", "RegimeDetector", "FactorMimic"}},
                    {"environments", {"WhiteNoise", "RegimeSwitch", "MA1Placebo", "FactorNull"}},
                    {"data_miner_K", 100},
                    {"flag_rate", 10.0}};
        case Experiment::DetectionFrontier: {
            std::vector<double> thr;
            for (int i = 0; i <= 15; ++i) thr.push_back(0.5 + 0.2 * i);
            return {{"phi", {0.05, 0.10, 0.15, 0.20, 0.25}},
                    {"theta", {1.0, 1.5, 2.0, 2.5, 3.0}},
                    {"thresholds", thr},
                    {"min_trades", 10}};
        }
        case Experiment::BreakEvenCost:
            return {{"p_stay", 0.994},  {"drift_mult", 2.0},  {"sigma_ann", 0.15},
                    {"lookbacks", {5, 10, 20, 40, 60}}, {"min_trades", 10}, {"screen", 1.96}};
        case Experiment::KeffValidation:
            return {{"scenarios",
                     {{{"name", "Independent"}, {"K", 100}, {"T", 250}},
                      {{"name", "Independent"}, {"K", 100}, {"T", 500}},
                      {{"name", "Independent"}, {"K", 100}, {"T", 1000}},
                      {{"name", "Factor (m=3)"}, {"K", 100}, {"T", 250}, {"factors", 3}},
                      {{"name", "Factor (m=3)"}, {"K", 100}, {"T", 500}, {"factors", 3}},
                      {{"name", "Factor (m=3)"}, {"K", 100}, {"T", 1000}, {"factors", 3}},
                      {{"name", "High-dim (K>T)"}, {"K", 500}, {"T", 250}},
                      {{"name", "High-dim (K=T)"}, {"K", 500}, {"T", 500}}}}};
        case Experiment::SplitSensitivity:
            return {{"K", 100}, {"splits", {0.5, 0.6, 0.7}}, {"tuning", tuning_default()}};
    }
    return json::object();
}

json resolved_grid(const ExperimentSpec& s) {
    json g = default_grid(s.experiment);
    for (auto it = s.grid.begin(); it != s.grid.end(); ++it) {
        if (!g.contains(it.key())) {
            throw ContractViolation(fmt::format("unknown grid key '{}' for {}", it.key(), to_string(s.experiment)));
        }
        g[it.key()] = it.value();
    }
    return g;
}

void ExperimentSpec::validate() const {
    if (N == 0) throw ContractViolation("N must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ContractViolation("split_ratio must lie in (0,1)");
    if (!grid.is_object()) throw ContractViolation("grid overrides must be a JSON object");
    (void)resolved_grid(*this);
}

json to_json(const ExperimentSpec& s) {
    return {{"experiment", to_string(s.experiment)},
            {"N", s.N},
            {"seed", s.seed},
            {"length_T", s.length_T},
            {"split_ratio", s.split_ratio},
            {"grid", resolved_grid(s)}};
}

ExperimentSpec experiment_from_json(const json& j) {
    ExperimentSpec s;
    s.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    s.N = j.value("N", s.N);
    s.seed = j.value("seed", s.seed);
    s.workers = j.value("workers", s.workers);
    s.length_T = j.value("length_T", s.length_T);
    s.split_ratio = j.value("split_ratio", s.split_ratio);
    if (j.contains("grid")) s.grid = j.at("grid");
    s.validate();
    return s;
}

std::uint64_t cell_seed(const ExperimentSpec& s, std::size_t cell) {
    return rng::derive(s.seed, static_cast<std::uint64_t>(s.experiment) + 1, cell);
}

bool ExperimentResult::failed() const {
    return std::any_of(tables.begin(), tables.end(), [](const report::ResultTable& t) { return t.any_failed(); });
}

ExperimentResult run_experiment(const ExperimentSpec& s) {
    s.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult out;
    out.resolved = to_json(s);
    const json g = resolved_grid(s);
    switch (s.experiment) {
        case Experiment::ScalingLaw: scaling_law(s, g, out); break;
        case Experiment::RedundancyLaw: redundancy_law(s, g, out); break;
        case Experiment::RedundancyImperfect: redundancy_imperfect(s, g, out); break;
        case Experiment::CapacityInflation: capacity_inflation(s, g, out); break;
        case Experiment::ThresholdAmplification: threshold_amplification(s, g, out); break;
        case Experiment::FalsificationMatrix: falsification_matrix(s, g, out); break;
        case Experiment::DetectionFrontier: detection_frontier(s, g, out); break;
        case Experiment::BreakEvenCost: breakeven_cost(s, g, out); break;
        case Experiment::KeffValidation: keff_validation(s, g, out); break;
        case Experiment::SplitSensitivity: split_sensitivity(s, g, out); break;
    }
    for (auto& t : out.tables) {
        t.metadata["experiment"] = to_string(s.experiment);
        t.metadata["N"] = s.N;
        t.metadata["seed"] = s.seed;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json tables = json::array();
    for (const auto& t : r.tables) {
        report::write_csv(t, dir / (t.name + ".csv"));
        std::ofstream js(dir / (t.name + ".json"));
        js << report::to_json(t).dump(2) << "\n";
        tables.push_back({{"name", t.name},
                          {"csv", t.name + ".csv"},
                          {"json", t.name + ".json"},
                          {"failed_rows", [&] {
                               json f = json::array();
                               for (const auto& row : t.rows) {
                                   if (row.failed) f.push_back({{"key", row.key}, {"error", row.error}});
                               }
                               return f;
                           }()}});
    }
    json manifest = {{"resolved", r.resolved},
                     {"seed_rule", "cell seed = derive(master, experiment_index + 1, cell); replication streams "
                                   "derive from the cell seed by (environment, replication)"},
                     {"tables", tables},
                     {"failed", r.failed()},
                     {"seconds", r.seconds}};
    std::ofstream os(dir / "manifest.json");
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", (dir / "manifest.json").string()));
    os << manifest.dump(2) << "\n";
}

report::ResultTable stabilization_table(double z_is, double tau, const std::vector<double>& z_wf) {
    auto t = make_table("stabilization", fmt::format("Raw versus stabilized inflation (Z_IS*={}, tau={})", z_is, tau),
                        {{"Z_WF*"}, {"BIF_raw"}, {"BIF_stab_tau"}, {"Deflator (d_tau)"}, {"Delta Z"}, {"Status"}});
    t.metadata["raw_rule"] = "raw ratio shown as NA when Z_WF* < tau";
    for (double zw : z_wf) {
        const auto d = audit::inflation_diagnostics(z_is, zw, tau);
        std::string status = "Agreement";
        if (zw == tau) status = "Boundary";
        else if (zw < tau) status = "Stabilized";
        const auto raw = (d.bif_raw && zw >= tau) ? report::number(*d.bif_raw) : report::na();
        t.rows.push_back(make_row(fmt::format("{:.2f}", zw),
                                  {report::label(fmt::format("{:.2f}", zw)), raw, report::number(d.bif_stab),
                                   report::number(d.deflator), report::number(d.delta_z), report::label(status)}));
    }
    return t;
}

}  // namespace nullaudit::experiments
