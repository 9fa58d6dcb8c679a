#include "nullaudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "nullaudit/errors.hpp"
#include "nullaudit/parallel.hpp"
#include "nullaudit/rng.hpp"
#include "nullaudit/stats.hpp"

namespace nullaudit::audit {

namespace {

constexpr std::uint64_t kWorkflowTag = 0x5EEDF10Eu;

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t parse_hex(const std::string& s) {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw CalibrationMismatch(fmt::format("bad hash '{}'", s));
    return v;
}

void require_audit_role(const NullEnvironment& e) {
    if (e.blind && e.blind->role != env::Role::Audit) {
        throw ContractViolation(
            fmt::format("environment '{}' is a Dev-role parameter set; gating requires the Audit set", e.id));
    }
}

double outcome_z_wf(const workflows::SelectionOutcome& o) { return o.degenerate ? 0.0 : o.z_wf_star; }

}  // namespace

InflationDiagnostics inflation_diagnostics(double z_is_star, double z_wf_star, double tau) {
    if (!std::isfinite(z_is_star) || !std::isfinite(z_wf_star) || z_is_star < 0.0 || z_wf_star < 0.0) {
        throw ContractViolation("winner magnitudes must be finite and >= 0");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ContractViolation("tau must be finite and > 0");
    InflationDiagnostics d;
    d.z_is_star = z_is_star;
    d.z_wf_star = z_wf_star;
    d.tau = tau;
    d.delta_z = z_is_star - z_wf_star;
    if (z_wf_star > 0.0) d.bif_raw = z_is_star / z_wf_star;
    d.bif_stab = z_is_star / std::max(z_wf_star, tau);
    d.deflator = d.bif_stab > 0.0 ? 1.0 / d.bif_stab : std::numeric_limits<double>::infinity();
    d.gated = z_wf_star >= tau;
    return d;
}

std::string_view to_string(CalibrationMode m) { return m == CalibrationMode::Reference ? "Reference" : "Self"; }

CalibrationMode calibration_mode_from_string(std::string_view s) {
    if (s == "Reference" || s == "reference") return CalibrationMode::Reference;
    if (s == "Self" || s == "self") return CalibrationMode::Self;
    throw ContractViolation(fmt::format("unknown calibration mode '{}'", s));
}

workflows::WorkflowSpec null_workflow(const workflows::WorkflowSpec& audited, CalibrationMode mode) {
    if (mode == CalibrationMode::Self) return audited;
    workflows::WorkflowSpec w;
    w.family = audited.K == 1 ? workflows::Family::RandomBaseline : workflows::Family::DataMiner;
    w.K = audited.K;
    w.split_ratio = audited.split_ratio;
    w.seed = audited.seed;
    w.params.tau = audited.params.tau;
    return w;
}

std::vector<NullEnvironment> canonical_environments(std::size_t length_T) {
    std::vector<NullEnvironment> out;
    for (auto f : {env::Family::WhiteNoise, env::Family::RegimeSwitch, env::Family::MA1Placebo,
                   env::Family::FactorNull, env::Family::Garch11}) {
        out.push_back({std::string(env::to_string(f)), env::default_spec(f, length_T), std::nullopt});
    }
    return out;
}

env::EnvironmentSpec replication_spec(const NullEnvironment& e, std::size_t env_index, std::uint64_t master,
                                      std::size_t rep) {
    env::EnvironmentSpec s = e.spec;
    if (e.blind) {
        const auto draws = env::draw_parameter_sets(*e.blind);
        s = draws.at(rep % draws.size()).spec;
    }
    s.seed = rng::derive(master, env_index, rep);
    return s;
}

std::uint64_t replication_workflow_seed(std::uint64_t master, std::size_t env_index, std::size_t rep) {
    return rng::derive(master, kWorkflowTag, env_index, rep);
}

workflows::SelectionOutcome run_replication(const workflows::WorkflowSpec& w, const NullEnvironment& e,
                                            std::size_t env_index, std::uint64_t master, std::size_t rep) {
    const auto path = env::generate(replication_spec(e, env_index, master, rep));
    workflows::WorkflowSpec ws = w;
    ws.seed = replication_workflow_seed(master, env_index, rep);
    return workflows::run_selection(ws, path);
}

const EnvCalibration& NullCalibration::find(const std::string& id) const {
    for (const auto& e : envs) {
        if (e.id == id) return e;
    }
    throw ContractViolation(fmt::format("calibration has no environment '{}'", id));
}

std::vector<double> NullCalibration::stage2_null_delta() const {
    std::vector<double> out;
    for (const auto& e : envs) {
        if (e.source.value("family", std::string()) == "WhiteNoise") {
            out.insert(out.end(), e.delta_z.begin(), e.delta_z.end());
        }
    }
    if (out.empty()) {
        for (const auto& e : envs) out.insert(out.end(), e.delta_z.begin(), e.delta_z.end());
    }
    return out;
}

NullCalibration calibrate_stage1(const workflows::WorkflowSpec& w, const std::vector<NullEnvironment>& envs,
                                 std::size_t M, double alpha, std::uint64_t seed, std::size_t workers,
                                 CalibrationMode mode) {
    if (M < kMinCalibrationReps) {
        throw ContractViolation(
            fmt::format("calibration needs M >= {} replications per environment (got {})", kMinCalibrationReps, M));
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractViolation("alpha must lie in (0,1)");
    if (envs.empty()) throw ContractViolation("calibration needs at least one environment");
    std::set<std::string> ids;
    for (const auto& e : envs) {
        require_audit_role(e);
        if (!ids.insert(e.id).second) throw ContractViolation(fmt::format("duplicate environment id '{}'", e.id));
        if (e.blind) env::draw_parameter_sets(*e.blind);  // domain errors before any replication
        else e.spec.validate();
    }
    w.validate();
    const workflows::WorkflowSpec sim = null_workflow(w, mode);

    NullCalibration cal;
    cal.mode = mode;
    cal.simulated = workflows::to_json(sim);
    cal.workflow = workflows::to_json(w);
    cal.workflow_hash = workflows::spec_hash(w);
    cal.M = M;
    cal.alpha = alpha;
    cal.level = 1.0 - alpha / static_cast<double>(envs.size());
    cal.seed = seed;
    cal.envs.resize(envs.size());

    std::vector<double> zwf(envs.size() * M), dz(envs.size() * M);
    parallel::for_each_index(envs.size() * M, workers, [&](std::size_t i) {
        const std::size_t e = i / M;
        const std::size_t m = i % M;
        const auto o = run_replication(sim, envs[e], e, seed, m);
        zwf[i] = outcome_z_wf(o);
        dz[i] = o.z_is_star - zwf[i];
    });
    for (std::size_t e = 0; e < envs.size(); ++e) {
        auto& c = cal.envs[e];
        c.id = envs[e].id;
        c.source = envs[e].blind ? env::to_json(*envs[e].blind) : env::to_json(envs[e].spec);
        c.z_wf_star.assign(zwf.begin() + static_cast<std::ptrdiff_t>(e * M),
                           zwf.begin() + static_cast<std::ptrdiff_t>((e + 1) * M));
        c.delta_z.assign(dz.begin() + static_cast<std::ptrdiff_t>(e * M),
                         dz.begin() + static_cast<std::ptrdiff_t>((e + 1) * M));
        c.zeta = stats::quantile_type1(c.z_wf_star, cal.level);
    }
    return cal;
}

Stage1Verdict stage1_gate(const std::map<std::string, double>& observed, const NullCalibration& cal,
                          std::uint64_t workflow_hash) {
    if (workflow_hash != cal.workflow_hash) {
        throw CalibrationMismatch(fmt::format("workflow hash {} does not match calibration hash {}",
                                              hex(workflow_hash), hex(cal.workflow_hash)));
    }
    for (const auto& [id, _] : observed) cal.find(id);
    Stage1Verdict v;
    for (const auto& c : cal.envs) {
        const auto it = observed.find(c.id);
        if (it == observed.end()) {
            throw ContractViolation(fmt::format("no observation for calibrated environment '{}'", c.id));
        }
        if (!std::isfinite(it->second) || it->second < 0.0) {
            throw ContractViolation(fmt::format("observed z_wf_star for '{}' must be finite and >= 0", c.id));
        }
        Stage1Record r{c.id, it->second, c.zeta, c.zeta - it->second, it->second > c.zeta};
        v.falsified = v.falsified || r.failed;
        v.records.push_back(r);
    }
    return v;
}

Stage2Verdict stage2_classify(const InflationDiagnostics& diag, const std::vector<double>& null_delta_sample) {
    if (null_delta_sample.empty()) throw ContractViolation("Stage 2 needs a non-empty null Delta-Z sample");
    std::vector<double> s = null_delta_sample;
    std::sort(s.begin(), s.end());
    Stage2Verdict v;
    v.diag = diag;
    v.eps95 = stats::quantile_type1_sorted(s, 0.95);
    v.eps99 = stats::quantile_type1_sorted(s, 0.99);
    v.inflation_flag = diag.delta_z > v.eps99;
    v.warning = diag.delta_z > v.eps95;
    return v;
}

std::vector<double> worst_case_null_delta(std::size_t K, std::size_t length_T, double split_ratio, std::size_t M,
                                          std::uint64_t seed, std::size_t workers) {
    if (M == 0) throw ContractViolation("worst-case null needs M >= 1");
    workflows::WorkflowSpec w;
    w.family = workflows::Family::DataMiner;
    w.K = K;
    w.split_ratio = split_ratio;
    const NullEnvironment wn{"WhiteNoise", env::default_spec(env::Family::WhiteNoise, length_T), std::nullopt};
    std::vector<double> out(M);
    parallel::for_each_index(M, workers, [&](std::size_t m) {
        const auto o = run_replication(w, wn, 0, seed, m);
        out[m] = o.z_is_star - outcome_z_wf(o);
    });
    return out;
}

int AuditReport::exit_code() const {
    if (stage1.falsified) return 2;
    if (stage2 && stage2->inflation_flag) return 3;
    return 0;
}

AuditReport run_audit(const workflows::WorkflowSpec& w, const NullCalibration& cal,
                      const std::vector<NullEnvironment>& envs, const env::ReturnPath& target,
                      std::uint64_t audit_seed, bool force_worst_case, std::size_t workers) {
    if (audit_seed == cal.seed) {
        throw ContractViolation("audit seed equals the calibration seed; observations would reuse calibration paths");
    }
    AuditReport r;
    r.workflow_hash = workflows::spec_hash(w);
    r.workflow_family = std::string(workflows::to_string(w.family));
    r.target = target.label;

    std::map<std::string, double> observed;
    for (std::size_t i = 0; i < envs.size(); ++i) {
        require_audit_role(envs[i]);
        observed[envs[i].id] = outcome_z_wf(run_replication(w, envs[i], i, audit_seed, 0));
    }
    r.stage1 = stage1_gate(observed, cal, r.workflow_hash);
    if (r.stage1.falsified) return r;

    const auto o = workflows::run_selection(w, target);
    const auto diag = inflation_diagnostics(o.z_is_star, outcome_z_wf(o), w.params.tau);
    std::vector<double> null_delta = force_worst_case ? std::vector<double>{} : cal.stage2_null_delta();
    bool worst = false;
    if (null_delta.empty()) {
        spdlog::warn("no workflow-matched null Delta-Z sample; using the worst-case independent-search null");
        null_delta = worst_case_null_delta(w.K, target.size(), w.split_ratio, cal.M, rng::derive(audit_seed, 0xBADu),
                                           workers);
        worst = true;
    }
    r.stage2 = stage2_classify(diag, null_delta);
    r.stage2->worst_case = worst || cal.mode == CalibrationMode::Reference;
    r.stage2->k_eff = o.k_eff_signal ? o.k_eff_signal : o.k_eff_pred;
    return r;
}

nlohmann::json to_json(const InflationDiagnostics& d) {
    return {{"z_is_star", d.z_is_star},
            {"z_wf_star", d.z_wf_star},
            {"delta_z", d.delta_z},
            {"bif_raw", d.bif_raw ? nlohmann::json(*d.bif_raw) : nlohmann::json(nullptr)},
            {"bif_stab", d.bif_stab},
            {"tau", d.tau},
            {"deflator", std::isfinite(d.deflator) ? nlohmann::json(d.deflator) : nlohmann::json("inf")},
            {"gated", d.gated}};
}

nlohmann::json to_json(const AuditReport& r) {
    nlohmann::json envs = nlohmann::json::array();
    for (const auto& e : r.stage1.records) {
        envs.push_back({{"environment", e.id},
                        {"observed_z_wf_star", e.observed},
                        {"zeta", e.zeta},
                        {"margin", e.margin},
                        {"failed", e.failed}});
    }
    nlohmann::json j = {{"version", kReportVersion},
                        {"workflow_hash", hex(r.workflow_hash)},
                        {"workflow_family", r.workflow_family},
                        {"target", r.target},
                        {"stage1", {{"falsified", r.stage1.falsified}, {"environments", envs}}},
                        {"exit_code", r.exit_code()}};
    if (r.stage2) {
        const auto& s = *r.stage2;
        j["stage2"] = {{"diagnostics", to_json(s.diag)},
                       {"eps95", s.eps95},
                       {"eps99", s.eps99},
                       {"inflation_flag", s.inflation_flag},
                       {"warning", s.warning},
                       {"worst_case_null", s.worst_case},
                       {"k_eff", s.k_eff ? nlohmann::json(*s.k_eff) : nlohmann::json(nullptr)}};
    } else {
        j["stage2"] = nullptr;
    }
    return j;
}

std::string to_text(const AuditReport& r) {
    std::ostringstream os;
    os << fmt::format("workflow {} (hash {}) on {}\n", r.workflow_family, hex(r.workflow_hash), r.target);
    os << fmt::format("{:<16} {:>10} {:>10} {:>10}  {}\n", "environment", "Z*_WF", "zeta", "margin", "result");
    for (const auto& e : r.stage1.records) {
        os << fmt::format("{:<16} {:>10.3f} {:>10.3f} {:>10.3f}  {}\n", e.id, e.observed, e.zeta, e.margin,
                          e.failed ? "FAIL" : "pass");
    }
    os << fmt::format("stage 1: {}\n", r.stage1.falsified ? "FALSIFIED" : "passed");
    if (r.stage2) {
        const auto& s = *r.stage2;
        os << fmt::format("stage 2: dZ={:.3f}  eps95={:.3f}  eps99={:.3f}  BIF_stab={:.3f} (tau={:g})", s.diag.delta_z,
                          s.eps95, s.eps99, s.diag.bif_stab, s.diag.tau);
        if (s.k_eff) os << fmt::format("  K_eff={:.2f}", *s.k_eff);
        os << "\n";
        os << fmt::format("verdict: {}{}\n",
                          s.inflation_flag ? "null-implausible inflation" : (s.warning ? "warning band" : "no flag"),
                          s.worst_case ? " (worst-case null)" : "");
    }
    return os.str();
}

void save_calibration(const NullCalibration& cal, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json envs = nlohmann::json::array();
    for (std::size_t i = 0; i < cal.envs.size(); ++i) {
        const auto& e = cal.envs[i];
        const std::string file = fmt::format("env_{:02d}.csv", i);
        std::ofstream os(dir / file);
        if (!os) throw std::runtime_error(fmt::format("cannot write {}", (dir / file).string()));
        os << "rep,z_wf_star,delta_z\n";
        for (std::size_t m = 0; m < e.z_wf_star.size(); ++m) {
            os << fmt::format("{},{:.17g},{:.17g}\n", m, e.z_wf_star[m], e.delta_z[m]);
        }
        envs.push_back({{"id", e.id}, {"source", e.source}, {"zeta", e.zeta}, {"samples", file}});
    }
    const nlohmann::json manifest = {{"version", kReportVersion},
                                     {"mode", std::string(to_string(cal.mode))},
                                     {"simulated_workflow", cal.simulated},
                                     {"workflow", cal.workflow},
                                     {"workflow_hash", hex(cal.workflow_hash)},
                                     {"M", cal.M},
                                     {"alpha", cal.alpha},
                                     {"level", cal.level},
                                     {"seed", cal.seed},
                                     {"environments", envs}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
}

NullCalibration load_calibration(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw CalibrationMismatch(fmt::format("no manifest.json in {}", dir.string()));
    const auto j = nlohmann::json::parse(is);
    NullCalibration cal;
    cal.mode = calibration_mode_from_string(j.at("mode").get<std::string>());
    cal.simulated = j.at("simulated_workflow");
    cal.workflow = j.at("workflow");
    cal.workflow_hash = parse_hex(j.at("workflow_hash").get<std::string>());
    if (cal.workflow_hash != workflows::spec_hash(workflows::workflow_from_json(cal.workflow))) {
        throw CalibrationMismatch("manifest workflow does not match its recorded hash");
    }
    cal.M = j.at("M").get<std::size_t>();
    cal.alpha = j.at("alpha").get<double>();
    cal.level = j.at("level").get<double>();
    cal.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("environments")) {
        EnvCalibration c;
        c.id = e.at("id").get<std::string>();
        c.source = e.at("source");
        std::ifstream cs(dir / e.at("samples").get<std::string>());
        if (!cs) throw CalibrationMismatch(fmt::format("missing sample file for '{}'", c.id));
        std::string line;
        std::getline(cs, line);
        while (std::getline(cs, line)) {
            if (line.empty()) continue;
            const auto a = line.find(',');
            const auto b = line.find(',', a + 1);
            c.z_wf_star.push_back(std::stod(line.substr(a + 1, b - a - 1)));
            c.delta_z.push_back(std::stod(line.substr(b + 1)));
        }
        if (c.z_wf_star.size() != cal.M) {
            throw CalibrationMismatch(fmt::format("'{}' has {} samples, manifest says {}", c.id, c.z_wf_star.size(), cal.M));
        }
        c.zeta = stats::quantile_type1(c.z_wf_star, cal.level);
        if (c.zeta != e.at("zeta").get<double>()) {
            throw CalibrationMismatch(fmt::format("'{}' samples do not reproduce the recorded threshold", c.id));
        }
        cal.envs.push_back(std::move(c));
    }
    return cal;
}

}  // namespace nullaudit::audit
