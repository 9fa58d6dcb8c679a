#include "nullaudit/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "nullaudit/errors.hpp"

namespace nullaudit::config {

using json = nlohmann::json;

namespace {

json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ContractViolation(fmt::format("cannot open {}", file.string()));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ContractViolation(fmt::format("{}: {}", file.string(), e.what()));
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) throw ContractViolation(fmt::format("unknown key '{}' in {}", it.key(), where));
    }
}

audit::NullEnvironment environment_from_json(const json& j, std::size_t T, const std::filesystem::path& base) {
    if (j.is_string()) {
        const auto f = env::family_from_string(j.get<std::string>());
        return {j.get<std::string>(), env::default_spec(f, T), std::nullopt};
    }
    check_keys(j, {"id", "spec", "distribution", "blind_file"}, "environment");
    audit::NullEnvironment e;
    e.id = j.at("id").get<std::string>();
    const int sources = static_cast<int>(j.contains("spec")) + static_cast<int>(j.contains("distribution")) +
                        static_cast<int>(j.contains("blind_file"));
    if (sources != 1) throw ContractViolation(fmt::format("environment '{}' needs exactly one of spec, distribution, blind_file", e.id));
    if (j.contains("spec")) {
        json s = j.at("spec");
        if (!s.contains("length_T")) s["length_T"] = T;
        e.spec = env::spec_from_json(s);
        return e;
    }
    json d = j.contains("distribution") ? j.at("distribution") : read_json(base / j.at("blind_file").get<std::string>());
    if (!d.contains("length_T")) d["length_T"] = T;
    e.blind = env::distribution_from_json(d);
    e.spec = env::default_spec(e.blind->family, e.blind->length_T);
    return e;
}

json environment_to_json(const audit::NullEnvironment& e) {
    if (e.blind) return {{"id", e.id}, {"distribution", env::to_json(*e.blind)}};
    return {{"id", e.id}, {"spec", env::to_json(e.spec)}};
}

}  // namespace

RunConfig default_config() {
    RunConfig c;
    c.environments = audit::canonical_environments(c.length_T);
    return c;
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j, {"length_T", "environments", "workflow", "audit", "experiment"}, "config");
    RunConfig c;
    c.length_T = j.value("length_T", c.length_T);
    if (j.contains("environments")) {
        for (const auto& e : j.at("environments")) c.environments.push_back(environment_from_json(e, c.length_T, base_dir));
    } else {
        c.environments = audit::canonical_environments(c.length_T);
    }
    if (j.contains("workflow")) c.workflow = workflows::workflow_from_json(j.at("workflow"));
    if (j.contains("audit")) {
        const auto& a = j.at("audit");
        check_keys(a, {"alpha", "M", "seed", "audit_seed", "mode", "tau", "force_worst_case"}, "audit");
        c.audit.alpha = a.value("alpha", c.audit.alpha);
        c.audit.M = a.value("M", c.audit.M);
        c.audit.seed = a.value("seed", c.audit.seed);
        c.audit.audit_seed = a.value("audit_seed", c.audit.audit_seed);
        if (a.contains("mode")) c.audit.mode = audit::calibration_mode_from_string(a.at("mode").get<std::string>());
        c.audit.force_worst_case = a.value("force_worst_case", c.audit.force_worst_case);
        if (a.contains("tau")) c.workflow.params.tau = a.at("tau").get<double>();
    }
    c.workflow.validate();
    if (j.contains("experiment")) {
        json e = j.at("experiment");
        if (!e.contains("length_T")) e["length_T"] = c.length_T;
        c.experiment = experiments::experiment_from_json(e);
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    return config_from_json(read_json(file), file.parent_path());
}

json to_json(const RunConfig& c) {
    json envs = json::array();
    for (const auto& e : c.environments) envs.push_back(environment_to_json(e));
    json j = {{"length_T", c.length_T},
              {"environments", envs},
              {"workflow", workflows::to_json(c.workflow)},
              {"audit",
               {{"alpha", c.audit.alpha},
                {"M", c.audit.M},
                {"seed", c.audit.seed},
                {"audit_seed", c.audit.audit_seed},
                {"mode", audit::to_string(c.audit.mode)},
                {"tau", c.workflow.params.tau},
                {"force_worst_case", c.audit.force_worst_case}}}};
    if (c.experiment) j["experiment"] = experiments::to_json(*c.experiment);
    return j;
}

}  // namespace nullaudit::config
