// nullaudit: simulate experiments, calibrate induced nulls, audit workflows.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "nullaudit/audit.hpp"
#include "nullaudit/config.hpp"
#include "nullaudit/errors.hpp"
#include "nullaudit/experiments.hpp"
#include "nullaudit/ingest.hpp"
#include "nullaudit/result_table.hpp"

namespace fs = std::filesystem;
using namespace nullaudit;

namespace {

fs::path default_out() {
    if (const char* e = std::getenv("NULLAUDIT_OUT"); e && *e) return e;
    return "nullaudit_out";
}

void write_json(const fs::path& file, const nlohmann::json& j) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream os(file);
    if (!os) throw std::runtime_error(fmt::format("cannot write {}", file.string()));
    os << j.dump(2) << "\n";
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replications;
    std::string out;
    std::size_t workers = 0;
    std::string verbosity = "warn";
};

void add_common(CLI::App* c, Common& o) {
    c->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "Master seed");
    c->add_option("--replications", o.replications, "Monte Carlo replications (N or M)");
    c->add_option("--out", o.out, "Output directory (default $NULLAUDIT_OUT or ./nullaudit_out)");
    c->add_option("--workers", o.workers, "Worker threads (0: hardware concurrency)");
    c->add_option("--log-level", o.verbosity, "trace|debug|info|warn|error|off");
}

config::RunConfig load(const Common& o) {
    return o.config.empty() ? config::default_config() : config::load_config(o.config);
}

fs::path out_dir(const Common& o) { return o.out.empty() ? default_out() : fs::path(o.out); }

int cmd_simulate(const Common& o, const std::string& name, const std::string& grid, std::optional<std::size_t> T) {
    const auto cfg = load(o);
    std::vector<experiments::Experiment> todo;
    if (name == "all") todo = experiments::all_experiments();
    else todo.push_back(experiments::experiment_from_string(name));
    bool failed = false;
    for (auto e : todo) {
        experiments::ExperimentSpec s;
        if (cfg.experiment && cfg.experiment->experiment == e) s = *cfg.experiment;
        s.experiment = e;
        s.length_T = T.value_or(cfg.experiment ? s.length_T : cfg.length_T);
        if (o.seed) s.seed = *o.seed;
        if (o.replications) s.N = *o.replications;
        s.workers = o.workers;
        if (!grid.empty()) s.grid = nlohmann::json::parse(grid);
        const auto res = experiments::run_experiment(s);
        const fs::path dir = todo.size() > 1 ? out_dir(o) / std::string(experiments::to_string(e)) : out_dir(o);
        experiments::write_outputs(res, dir);
        for (const auto& t : res.tables) std::cout << report::to_text(t) << "\n";
        std::cout << fmt::format("{}: {:.1f} s, outputs in {}\n", experiments::to_string(e), res.seconds, dir.string());
        failed = failed || res.failed();
    }
    return failed ? 1 : 0;
}

int cmd_calibrate(const Common& o, const std::string& mode) {
    auto cfg = load(o);
    if (o.seed) cfg.audit.seed = *o.seed;
    if (o.replications) cfg.audit.M = *o.replications;
    if (!mode.empty()) cfg.audit.mode = audit::calibration_mode_from_string(mode);
    const auto cal = audit::calibrate_stage1(cfg.workflow, cfg.environments, cfg.audit.M, cfg.audit.alpha,
                                             cfg.audit.seed, o.workers, cfg.audit.mode);
    const auto dir = out_dir(o);
    audit::save_calibration(cal, dir);
    write_json(dir / "resolved_config.json", config::to_json(cfg));
    std::cout << fmt::format("calibrated {} environments (M={}, level={:.4f}, mode={}) into {}\n", cal.envs.size(),
                             cal.M, cal.level, audit::to_string(cal.mode), dir.string());
    for (const auto& e : cal.envs) std::cout << fmt::format("  {:<16} zeta={:.4f}\n", e.id, e.zeta);
    return 0;
}

int cmd_audit(const Common& o, const std::string& calibration, const std::string& data, const std::string& env_name,
              std::uint64_t env_seed, bool strict, bool worst_case) {
    auto cfg = load(o);
    if (o.seed) cfg.audit.audit_seed = *o.seed;
    if (o.replications) cfg.audit.M = *o.replications;
    cfg.audit.force_worst_case = cfg.audit.force_worst_case || worst_case;

    env::ReturnPath target;
    if (!data.empty()) {
        ingest::Options opt;
        opt.strict = strict;
        auto res = ingest::ingest_returns(data, opt);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        if (res.gaps.missing_weekdays > 0) {
            std::cerr << fmt::format("gap report: {} missing weekdays in {} gaps\n", res.gaps.missing_weekdays,
                                     res.gaps.gaps.size());
        }
        target = std::move(res.path);
    } else {
        const auto f = env::family_from_string(env_name.empty() ? "WhiteNoise" : env_name);
        target = env::generate(env::default_spec(f, cfg.length_T, env_seed));
    }

    audit::NullCalibration cal;
    if (!calibration.empty()) {
        cal = audit::load_calibration(calibration);
    } else {
        spdlog::info("no calibration archive given; calibrating in-process (M={})", cfg.audit.M);
        cal = audit::calibrate_stage1(cfg.workflow, cfg.environments, cfg.audit.M, cfg.audit.alpha, cfg.audit.seed,
                                      o.workers, cfg.audit.mode);
    }
    const auto rep = audit::run_audit(cfg.workflow, cal, cfg.environments, target, cfg.audit.audit_seed,
                                      cfg.audit.force_worst_case, o.workers);
    std::cout << audit::to_text(rep);
    const auto dir = out_dir(o);
    write_json(dir / "audit_report.json", audit::to_json(rep));
    write_json(dir / "resolved_config.json", config::to_json(cfg));
    return rep.exit_code();
}

int cmd_report_stabilization(const Common& o, double z_is, double tau) {
    const auto t = experiments::stabilization_table(z_is, tau);
    std::cout << report::to_text(t);
    if (!o.out.empty() || std::getenv("NULLAUDIT_OUT")) {
        const auto dir = out_dir(o);
        fs::create_directories(dir);
        report::write_csv(t, dir / "stabilization.csv");
        write_json(dir / "stabilization.json", report::to_json(t));
    }
    return 0;
}

int cmd_report_table(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", file));
    const auto t = report::table_from_json(nlohmann::json::parse(in));
    std::cout << report::to_text(t);
    return t.any_failed() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Induced-null audits for backtest selection bias"};
    app.require_subcommand(1);
    Common common;

    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment grid");
    add_common(sim, common);
    std::string exp_name, grid;
    std::optional<std::size_t> length_T;
    sim->add_option("experiment", exp_name, "Experiment name or 'all'")->required();
    sim->add_option("--grid", grid, "JSON object of grid overrides");
    sim->add_option("--length", length_T, "Path length T");

    auto* cal = app.add_subcommand("calibrate", "Stage-1 calibration archive for a workflow");
    add_common(cal, common);
    std::string mode;
    cal->add_option("--mode", mode, "Reference or Self");

    auto* aud = app.add_subcommand("audit", "Two-stage audit of a workflow on a target series");
    add_common(aud, common);
    std::string calibration, data, env_name;
    std::uint64_t env_seed = 1;
    bool strict = true, worst_case = false;
    aud->add_option("--calibration", calibration, "Calibration archive directory")->check(CLI::ExistingDirectory);
    auto* data_opt = aud->add_option("--data", data, "CSV with columns date,return")->check(CLI::ExistingFile);
    aud->add_option("--env", env_name, "Synthetic target family when no CSV is given")->excludes(data_opt);
    aud->add_option("--env-seed", env_seed, "Seed of the synthetic target");
    aud->add_flag("--strict,!--lenient", strict, "Ingestion strictness (default strict)");
    aud->add_flag("--worst-case", worst_case, "Force the worst-case Stage-2 null");

    auto* rep = app.add_subcommand("report", "Render tables");
    rep->require_subcommand(1);
    auto* stab = rep->add_subcommand("stabilization", "Closed-form raw versus stabilized inflation table");
    add_common(stab, common);
    double z_is = 3.0, tau = 0.5;
    stab->add_option("--z-is", z_is, "In-sample statistic");
    stab->add_option("--tau", tau, "Stabilization floor");
    auto* tab = rep->add_subcommand("table", "Render a table JSON written by simulate");
    std::string table_file;
    tab->add_option("file", table_file, "Table JSON")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(common.verbosity));

    try {
        if (sim->parsed()) return cmd_simulate(common, exp_name, grid, length_T);
        if (cal->parsed()) return cmd_calibrate(common, mode);
        if (aud->parsed()) return cmd_audit(common, calibration, data, env_name, env_seed, strict, worst_case);
        if (stab->parsed()) return cmd_report_stabilization(common, z_is, tau);
        if (tab->parsed()) return cmd_report_table(table_file);
    } catch (const IngestionError& e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return 1;
    } catch (const CalibrationMismatch& e) {
        std::cerr << "calibration mismatch: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
