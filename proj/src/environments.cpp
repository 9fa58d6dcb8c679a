#include "nullaudit/environments.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "nullaudit/errors.hpp"
#include "nullaudit/rng.hpp"

namespace nullaudit::env {

namespace {

constexpr std::array<std::string_view, 6> kFamilyNames = {
    "WhiteNoise", "RegimeSwitch", "MA1Placebo", "FactorNull", "Garch11", "TarPositive"};

double daily(double ann) { return ann / std::sqrt(kTradingDays); }

void require(bool ok, const std::string& msg) {
    if (!ok) throw ParameterDomainError(msg);
}

bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

void validate_params(const Params& p) {
    std::visit(
        [](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, WhiteNoiseParams>) {
                require(finite_pos(q.sigma_ann), "WhiteNoise: sigma_ann must be > 0");
            } else if constexpr (std::is_same_v<T, RegimeSwitchParams>) {
                require(finite_pos(q.sigma_ann_low), "RegimeSwitch: sigma_ann_low must be > 0");
                require(std::isfinite(q.vol_multiplier) && q.vol_multiplier > 1.0,
                        "RegimeSwitch: vol_multiplier must be > 1");
                require(q.p11 > 0.0 && q.p11 < 1.0, "RegimeSwitch: p11 must lie in (0,1)");
                require(q.p22 > 0.0 && q.p22 < 1.0, "RegimeSwitch: p22 must lie in (0,1)");
            } else if constexpr (std::is_same_v<T, MA1PlaceboParams>) {
                require(finite_pos(q.sigma_ann), "MA1Placebo: sigma_ann must be > 0");
                require(std::isfinite(q.theta) && std::fabs(q.theta) < 1.0,
                        "MA1Placebo: |theta| must be < 1");
            } else if constexpr (std::is_same_v<T, FactorNullParams>) {
                require(std::isfinite(q.beta), "FactorNull: beta must be finite");
                require(finite_pos(q.sigma_f_ann), "FactorNull: sigma_f_ann must be > 0");
                require(finite_pos(q.sigma_e_ann), "FactorNull: sigma_e_ann must be > 0");
            } else if constexpr (std::is_same_v<T, Garch11Params>) {
                require(finite_pos(q.sigma_ann), "Garch11: sigma_ann must be > 0");
                require(std::isfinite(q.alpha) && q.alpha >= 0.0, "Garch11: alpha must be >= 0");
                require(std::isfinite(q.beta) && q.beta >= 0.0, "Garch11: beta must be >= 0");
                require(q.alpha + q.beta < 1.0, "Garch11: alpha + beta must be < 1");
            } else if constexpr (std::is_same_v<T, TarParams>) {
                require(finite_pos(q.sigma_ann), "TarPositive: sigma_ann must be > 0");
                require(std::isfinite(q.phi) && std::fabs(q.phi) < 1.0, "TarPositive: |phi| must be < 1");
                require(std::isfinite(q.theta_act) && q.theta_act >= 0.0,
                        "TarPositive: theta_act must be >= 0");
            }
        },
        p);
}

Family family_of(const Params& p) { return static_cast<Family>(p.index()); }

nlohmann::json params_to_json(const Params& p) {
    return std::visit(
        [](const auto& q) -> nlohmann::json {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, WhiteNoiseParams>) {
                return {{"sigma_ann", q.sigma_ann}};
            } else if constexpr (std::is_same_v<T, RegimeSwitchParams>) {
                return {{"sigma_ann_low", q.sigma_ann_low},
                        {"vol_multiplier", q.vol_multiplier},
                        {"p11", q.p11},
                        {"p22", q.p22}};
            } else if constexpr (std::is_same_v<T, MA1PlaceboParams>) {
                return {{"sigma_ann", q.sigma_ann}, {"theta", q.theta}};
            } else if constexpr (std::is_same_v<T, FactorNullParams>) {
                return {{"beta", q.beta}, {"sigma_f_ann", q.sigma_f_ann}, {"sigma_e_ann", q.sigma_e_ann}};
            } else if constexpr (std::is_same_v<T, Garch11Params>) {
                return {{"alpha", q.alpha}, {"beta", q.beta}, {"sigma_ann", q.sigma_ann}};
            } else {
                return {{"phi", q.phi}, {"theta_act", q.theta_act}, {"sigma_ann", q.sigma_ann}};
            }
        },
        p);
}

// Missing keys keep the family default; unknown keys are rejected.
Params params_from_json(Family f, const nlohmann::json& j) {
    Params p = default_calibration(f);
    nlohmann::json merged = params_to_json(p);
    for (const auto& [k, v] : j.items()) {
        if (!merged.contains(k)) {
            throw ParameterDomainError(fmt::format("{}: unknown parameter '{}'", to_string(f), k));
        }
        merged[k] = v;
    }
    std::visit(
        [&](auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, WhiteNoiseParams>) {
                q.sigma_ann = merged.at("sigma_ann");
            } else if constexpr (std::is_same_v<T, RegimeSwitchParams>) {
                q.sigma_ann_low = merged.at("sigma_ann_low");
                q.vol_multiplier = merged.at("vol_multiplier");
                q.p11 = merged.at("p11");
                q.p22 = merged.at("p22");
            } else if constexpr (std::is_same_v<T, MA1PlaceboParams>) {
                q.sigma_ann = merged.at("sigma_ann");
                q.theta = merged.at("theta");
            } else if constexpr (std::is_same_v<T, FactorNullParams>) {
                q.beta = merged.at("beta");
                q.sigma_f_ann = merged.at("sigma_f_ann");
                q.sigma_e_ann = merged.at("sigma_e_ann");
            } else if constexpr (std::is_same_v<T, Garch11Params>) {
                q.alpha = merged.at("alpha");
                q.beta = merged.at("beta");
                q.sigma_ann = merged.at("sigma_ann");
            } else {
                q.phi = merged.at("phi");
                q.theta_act = merged.at("theta_act");
                q.sigma_ann = merged.at("sigma_ann");
            }
        },
        p);
    return p;
}

void gen_white_noise(const WhiteNoiseParams& q, rng::Stream& s, std::vector<double>& r) {
    const double sd = daily(q.sigma_ann);
    for (auto& v : r) v = sd * s.normal();
}

void gen_regime_switch(const RegimeSwitchParams& q, rng::Stream& s, std::vector<double>& r) {
    const double sd1 = daily(q.sigma_ann_low);
    const double sd2 = sd1 * q.vol_multiplier;
    const double pi1 = (1.0 - q.p22) / ((1.0 - q.p11) + (1.0 - q.p22));
    int state = s.uniform() < pi1 ? 1 : 2;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) {
            const double stay = state == 1 ? q.p11 : q.p22;
            if (s.uniform() >= stay) state = 3 - state;
        }
        r[t] = (state == 1 ? sd1 : sd2) * s.normal();
    }
}

void gen_ma1(const MA1PlaceboParams& q, rng::Stream& s, std::vector<double>& r) {
    const double se = daily(q.sigma_ann) / std::sqrt(1.0 + q.theta * q.theta);
    double u_prev = se * s.normal();
    for (auto& v : r) {
        const double u = se * s.normal();
        v = u + q.theta * u_prev;
        u_prev = u;
    }
}

void gen_factor(const FactorNullParams& q, rng::Stream& s, std::vector<double>& r) {
    const double sf = daily(q.sigma_f_ann);
    const double se = daily(q.sigma_e_ann);
    for (auto& v : r) {
        const double f = sf * s.normal();
        const double e = se * s.normal();
        v = q.beta * f + e;
    }
}

constexpr std::size_t kGarchBurnIn = 500;

void gen_garch(const Garch11Params& q, rng::Stream& s, std::vector<double>& r) {
    const double var = daily(q.sigma_ann) * daily(q.sigma_ann);
    const double omega = (1.0 - q.alpha - q.beta) * var;
    double h = var;
    const std::size_t total = kGarchBurnIn + r.size();
    for (std::size_t t = 0; t < total; ++t) {
        const double x = std::sqrt(h) * s.normal();
        if (t >= kGarchBurnIn) r[t - kGarchBurnIn] = x;
        h = omega + q.alpha * x * x + q.beta * h;
    }
}

void gen_tar(const TarParams& q, rng::Stream& s, std::vector<double>& r) {
    const double sd = daily(q.sigma_ann);
    const double cut = q.theta_act * sd;
    double prev = 0.0;
    for (auto& v : r) {
        const double ar = std::fabs(prev) > cut ? q.phi * prev : 0.0;
        v = ar + sd * s.normal();
        prev = v;
    }
}

}  // namespace

std::string_view to_string(Family f) { return kFamilyNames.at(static_cast<std::size_t>(f)); }

Family family_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
        if (kFamilyNames[i] == s) return static_cast<Family>(i);
    }
    // Aliases used in result tables.
    if (s == "Microstructure" || s == "MA1") return Family::MA1Placebo;
    if (s == "GARCH" || s == "Garch") return Family::Garch11;
    if (s == "TAR") return Family::TarPositive;
    throw ParameterDomainError(fmt::format("unknown environment family '{}'", s));
}

void EnvironmentSpec::validate() const {
    require(length_T >= 2, "length_T must be >= 2");
    require(family_of(params) == family, "params record does not match family");
    validate_params(params);
}

Params default_calibration(Family family) {
    switch (family) {
        case Family::WhiteNoise: return WhiteNoiseParams{};
        case Family::RegimeSwitch: return RegimeSwitchParams{};
        case Family::MA1Placebo: return MA1PlaceboParams{};
        case Family::FactorNull: return FactorNullParams{};
        case Family::Garch11: return Garch11Params{};
        case Family::TarPositive: return TarParams{};
    }
    throw ParameterDomainError("unknown family");
}

EnvironmentSpec default_spec(Family family, std::size_t length_T, std::uint64_t seed) {
    return EnvironmentSpec{family, default_calibration(family), length_T, seed};
}

ReturnPath generate(const EnvironmentSpec& spec) {
    spec.validate();
    ReturnPath out;
    out.r.resize(spec.length_T);
    out.label = std::string(to_string(spec.family));
    out.seed = spec.seed;
    out.spec = spec;
    rng::Stream s(rng::derive(spec.seed, static_cast<std::uint64_t>(spec.family) + 1));
    std::visit(
        [&](const auto& q) {
            using T = std::decay_t<decltype(q)>;
            if constexpr (std::is_same_v<T, WhiteNoiseParams>) gen_white_noise(q, s, out.r);
            else if constexpr (std::is_same_v<T, RegimeSwitchParams>) gen_regime_switch(q, s, out.r);
            else if constexpr (std::is_same_v<T, MA1PlaceboParams>) gen_ma1(q, s, out.r);
            else if constexpr (std::is_same_v<T, FactorNullParams>) gen_factor(q, s, out.r);
            else if constexpr (std::is_same_v<T, Garch11Params>) gen_garch(q, s, out.r);
            else gen_tar(q, s, out.r);
        },
        spec.params);
    return out;
}

std::string_view to_string(Role r) { return r == Role::Dev ? "Dev" : "Audit"; }

Role role_from_string(std::string_view s) {
    if (s == "Dev" || s == "dev") return Role::Dev;
    if (s == "Audit" || s == "audit") return Role::Audit;
    throw ParameterDomainError(fmt::format("unknown role '{}'", s));
}

std::uint64_t lineage_seed(std::uint64_t seed, Role role) {
    return rng::derive(seed, rng::fnv1a(to_string(role)));
}

std::vector<ParameterDraw> draw_parameter_sets(const ParameterDistribution& dist) {
    const nlohmann::json base = params_to_json(default_calibration(dist.family));
    for (const auto& [name, range] : dist.ranges) {
        if (!base.contains(name)) {
            throw ParameterDomainError(
                fmt::format("{}: unknown parameter '{}'", to_string(dist.family), name));
        }
        if (!(std::isfinite(range.lo) && std::isfinite(range.hi) && range.lo <= range.hi)) {
            throw ParameterDomainError(fmt::format("range for '{}' must satisfy lo <= hi", name));
        }
    }
    // Every domain here is convex, so checking the box corners covers the whole range.
    std::vector<std::string> keys;
    for (const auto& kv : dist.ranges) keys.push_back(kv.first);
    const std::size_t corners = std::size_t{1} << keys.size();
    for (std::size_t c = 0; c < corners; ++c) {
        nlohmann::json j = base;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const Range& rg = dist.ranges.at(keys[i]);
            j[keys[i]] = ((c >> i) & 1U) ? rg.hi : rg.lo;
        }
        try {
            EnvironmentSpec probe{dist.family, params_from_json(dist.family, j), dist.length_T, 0};
            probe.validate();
        } catch (const ParameterDomainError& e) {
            throw ParameterDomainError(std::string("range leaves the parameter domain: ") + e.what());
        }
    }

    const std::uint64_t lineage = lineage_seed(dist.seed, dist.role);
    rng::Stream s(lineage);
    std::vector<ParameterDraw> out;
    out.reserve(dist.draw_count);
    for (std::size_t i = 0; i < dist.draw_count; ++i) {
        nlohmann::json j = base;
        for (const auto& k : keys) {
            const Range& rg = dist.ranges.at(k);
            const double u = s.uniform();
            j[k] = rg.lo == rg.hi ? rg.lo : rg.lo + (rg.hi - rg.lo) * u;
        }
        EnvironmentSpec spec{dist.family, params_from_json(dist.family, j), dist.length_T,
                             rng::derive(lineage, i)};
        spec.validate();
        out.push_back(ParameterDraw{spec, lineage, i});
    }
    return out;
}

void check_disjoint(const std::vector<ParameterDraw>& dev, const std::vector<ParameterDraw>& audit) {
    std::set<std::uint64_t> seen;
    for (const auto& d : dev) {
        seen.insert(d.lineage);
        seen.insert(d.spec.seed);
    }
    for (const auto& a : audit) {
        if (seen.count(a.lineage) || seen.count(a.spec.seed)) {
            throw ContractViolation("Dev and Audit parameter sets share a seed lineage");
        }
    }
}

nlohmann::json to_json(const EnvironmentSpec& spec) {
    return {{"family", std::string(to_string(spec.family))},
            {"params", params_to_json(spec.params)},
            {"length_T", spec.length_T},
            {"seed", spec.seed}};
}

EnvironmentSpec spec_from_json(const nlohmann::json& j) {
    EnvironmentSpec s;
    s.family = family_from_string(j.at("family").get<std::string>());
    s.params = params_from_json(s.family, j.value("params", nlohmann::json::object()));
    s.length_T = j.value("length_T", std::size_t{2520});
    s.seed = j.value("seed", std::uint64_t{0});
    s.validate();
    return s;
}

nlohmann::json to_json(const ParameterDistribution& d) {
    nlohmann::json ranges = nlohmann::json::object();
    for (const auto& [k, v] : d.ranges) ranges[k] = {v.lo, v.hi};
    return {{"family", std::string(to_string(d.family))},
            {"ranges", ranges},
            {"draw_count", d.draw_count},
            {"seed", d.seed},
            {"role", std::string(to_string(d.role))},
            {"length_T", d.length_T}};
}

ParameterDistribution distribution_from_json(const nlohmann::json& j) {
    ParameterDistribution d;
    d.family = family_from_string(j.at("family").get<std::string>());
    const auto ranges = j.value("ranges", nlohmann::json::object());
    for (const auto& [k, v] : ranges.items()) {
        if (!v.is_array() || v.size() != 2) {
            throw ParameterDomainError(fmt::format("range '{}' must be [lo, hi]", k));
        }
        d.ranges[k] = Range{v[0].get<double>(), v[1].get<double>()};
    }
    d.draw_count = j.value("draw_count", std::size_t{1});
    d.seed = j.value("seed", std::uint64_t{0});
    d.role = role_from_string(j.value("role", std::string("Dev")));
    d.length_T = j.value("length_T", std::size_t{2520});
    return d;
}

void write_csv(const ReturnPath& path, const std::filesystem::path& file) {
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot open " + file.string());
    os << "t,r_t\n";
    for (std::size_t t = 0; t < path.r.size(); ++t) os << fmt::format("{},{:.17g}\n", t, path.r[t]);
}

namespace {
constexpr char kMagic[8] = {'N', 'A', 'U', 'D', 'R', 'E', 'T', '1'};
}

void write_binary(const ReturnPath& path, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file.string());
    os.write(kMagic, sizeof kMagic);
    const std::uint64_t n = path.r.size();
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&path.seed), sizeof path.seed);
    os.write(reinterpret_cast<const char*>(path.r.data()),
             static_cast<std::streamsize>(n * sizeof(double)));
}

ReturnPath read_binary(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + file.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw std::runtime_error(file.string() + ": not a return dump");
    }
    std::uint64_t n = 0;
    ReturnPath p;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&p.seed), sizeof p.seed);
    p.r.resize(n);
    is.read(reinterpret_cast<char*>(p.r.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error(file.string() + ": truncated dump");
    p.label = file.stem().string();
    return p;
}

}  // namespace nullaudit::env
