#pragma once

// INI run configuration. Sections:
//
//   [model]       driver, band, intensity curve, grid and survival convention
//   [market]      discount short-rate curve and recovery
//   [instrument]  instrument type and its dates / strikes
//   [mc]          optional; path count, seed and estimator choices
//
// Curves are either a single number (flat) or "t:v, t:v, ..." pairs, where
// each value applies from its time until the next one.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dirac/curves.hpp"
#include "dirac/dirac_sim.hpp"
#include "dirac/error.hpp"
#include "dirac/instruments.hpp"
#include "dirac/ou_state.hpp"

namespace dirac {

/// Config failure carrying every problem found, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> issues)
        : Error(ErrorKind::config, "cli", join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out;
        for (const auto& s : issues) out += (out.empty() ? "" : "; ") + s;
        return out;
    }
    std::vector<std::string> issues_;
};

enum class ModelKind { ou_severity, fixed_severity };

enum class InstrumentType { zcb_defaultable, zcb_semi, cds, irs, bond_option, cds_swaption };

inline const char* to_string(InstrumentType t) noexcept {
    switch (t) {
        case InstrumentType::zcb_defaultable: return "zcb-defaultable";
        case InstrumentType::zcb_semi: return "zcb-semi";
        case InstrumentType::cds: return "cds";
        case InstrumentType::irs: return "irs";
        case InstrumentType::bond_option: return "bond-option";
        case InstrumentType::cds_swaption: return "cds-swaption";
    }
    return "unknown";
}

struct ModelConfig {
    ModelKind kind = ModelKind::ou_severity;
    OUParams ou;
    double band = 1.0;
    double severity = 0.0;  // fixed-severity models only
    std::optional<double> sigma_after;
    std::optional<double> switch_time;
    PiecewiseFlatCurve intensity;
    SurvivalConvention convention = SurvivalConvention::one_minus_severity;
    int n_nodes = 201;
    double half_width = 6.0;
    double tail_tol = kDefaultTailTol;
};

struct MarketConfig {
    PiecewiseFlatCurve rate;
    double recovery = 0.4;
};

struct InstrumentConfig {
    InstrumentType type = InstrumentType::zcb_defaultable;
    double maturity = 0.0;
    double default_horizon = 0.0;  // zcb-semi: end of the default window
    double start = 0.0;
    double end = 0.0;
    double expiry = 0.0;
    std::optional<double> premium;
    std::optional<double> strike;
    std::optional<double> fixed_rate;
    int frequency = 4;
    OptionType option = OptionType::call;
    std::vector<double> strike_multiples{0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
};

struct MonteCarloConfig {
    std::size_t paths = 100000;
    std::uint64_t seed = 42;
    McEstimator estimator = McEstimator::pathwise;
    KnockOut knock_out = KnockOut::bernoulli;
};

struct RunConfig {
    ModelConfig model;
    MarketConfig market;
    InstrumentConfig instrument;
    MonteCarloConfig mc;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_real(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno == ERANGE || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_u64(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno == ERANGE) return std::nullopt;
    return static_cast<std::uint64_t>(v);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    return parts;
}

inline std::optional<std::vector<double>> parse_real_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) {
        auto v = parse_real(part);
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

/// "0.02" or "0:0.01, 1:0.03". Returns an error message on failure.
inline std::optional<std::string> parse_curve(const std::string& s, PiecewiseFlatCurve& curve) {
    if (auto flat = parse_real(s)) {
        curve = PiecewiseFlatCurve::flat(*flat);
        return std::nullopt;
    }
    std::vector<double> times, values;
    for (const auto& part : split(s, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) return "expected a number or time:value pairs";
        auto t = parse_real(part.substr(0, colon));
        auto v = parse_real(part.substr(colon + 1));
        if (!t || !v) return "malformed time:value pair '" + part + "'";
        times.push_back(*t);
        values.push_back(*v);
    }
    try {
        curve = PiecewiseFlatCurve(times, values);
    } catch (const Error& e) {
        return e.what();
    }
    return std::nullopt;
}

/// Reads one section against a fixed key set, collecting issues.
class SectionReader {
public:
    SectionReader(const boost::property_tree::ptree* section, std::string name, std::set<std::string> known,
                  std::vector<std::string>& issues)
        : section_(section), name_(std::move(name)), issues_(issues) {
        if (!section_) return;
        for (const auto& [key, child] : *section_) {
            if (!known.count(key)) issue(key, "unknown key");
        }
    }

    bool has(const std::string& key) const { return section_ && section_->find(key) != section_->not_found(); }

    std::optional<std::string> text(const std::string& key, bool required) {
        if (!has(key)) {
            if (required) issue(key, "missing required key");
            return std::nullopt;
        }
        return trim(section_->get<std::string>(key));
    }

    std::optional<double> real(const std::string& key, bool required) {
        auto t = text(key, required);
        if (!t) return std::nullopt;
        auto v = parse_real(*t);
        if (!v) issue(key, "not a finite number: '" + *t + "'");
        return v;
    }

    void real_into(const std::string& key, double& dst, bool required) {
        if (auto v = real(key, required)) dst = *v;
    }

    void issue(const std::string& key, const std::string& what) { issues_.push_back(name_ + "." + key + ": " + what); }

private:
    const boost::property_tree::ptree* section_;
    std::string name_;
    std::vector<std::string>& issues_;
};

inline const boost::property_tree::ptree* find_section(const boost::property_tree::ptree& root,
                                                       const std::string& name) {
    auto it = root.find(name);
    return it == root.not_found() ? nullptr : &it->second;
}

}  // namespace detail

inline std::optional<SurvivalConvention> parse_convention(const std::string& s) {
    if (s == "one-minus") return SurvivalConvention::one_minus_severity;
    if (s == "exp") return SurvivalConvention::exp_severity;
    return std::nullopt;
}

/// Parses and validates a run configuration held in `text`. Throws
/// ConfigError listing every problem found.
inline RunConfig parse_config_string(const std::string& text) {
    namespace pt = boost::property_tree;
    using detail::SectionReader;

    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({"syntax error at line " + std::to_string(e.line()) + ": " + e.message()});
    }

    std::vector<std::string> issues;
    const std::set<std::string> sections{"model", "market", "instrument", "mc"};
    for (const auto& [name, child] : root) {
        if (!sections.count(name)) {
            issues.push_back(child.empty() ? "key '" + name + "' outside any section"
                                           : "unknown section [" + name + "]");
        }
    }
    for (const char* required : {"model", "market", "instrument"}) {
        if (!detail::find_section(root, required)) issues.push_back(std::string("missing section [") + required + "]");
    }

    RunConfig cfg;

    // [instrument] first: several model defaults depend on the type.
    bool type_ok = false;
    if (const auto* sec = detail::find_section(root, "instrument")) {
        SectionReader r(sec, "instrument",
                        {"type", "maturity", "default_horizon", "start", "end", "expiry", "premium", "strike",
                         "fixed_rate", "frequency", "option", "strikes"},
                        issues);
        auto& ins = cfg.instrument;
        if (auto t = r.text("type", true)) {
            static const std::map<std::string, InstrumentType> types{
                {"zcb-defaultable", InstrumentType::zcb_defaultable}, {"zcb-semi", InstrumentType::zcb_semi},
                {"cds", InstrumentType::cds},                         {"irs", InstrumentType::irs},
                {"bond-option", InstrumentType::bond_option},         {"cds-swaption", InstrumentType::cds_swaption}};
            if (auto it = types.find(*t); it != types.end()) {
                ins.type = it->second;
                type_ok = true;
            } else {
                r.issue("type", "unknown instrument type '" + *t + "'");
            }
        }
        if (auto f = r.text("frequency", false)) {
            auto v = detail::parse_u64(*f);
            if (!v || *v == 0 || *v > 365) {
                r.issue("frequency", "must be an integer in [1, 365]");
            } else {
                ins.frequency = static_cast<int>(*v);
            }
        } else if (ins.type == InstrumentType::irs) {
            ins.frequency = 1;
        }
        if (auto o = r.text("option", false)) {
            if (*o == "call") {
                ins.option = OptionType::call;
            } else if (*o == "put") {
                ins.option = OptionType::put;
            } else {
                r.issue("option", "must be call or put");
            }
        }
        if (auto s = r.text("strikes", false)) {
            auto v = detail::parse_real_list(*s);
            if (!v || std::any_of(v->begin(), v->end(), [](double m) { return m <= 0.0; })) {
                r.issue("strikes", "must be a comma-separated list of positive strike multiples");
            } else {
                ins.strike_multiples = *v;
            }
        }
        ins.premium = r.real("premium", false);
        ins.strike = r.real("strike", false);
        ins.fixed_rate = r.real("fixed_rate", false);

        if (type_ok) {
            const bool needs_maturity = ins.type == InstrumentType::zcb_defaultable ||
                                        ins.type == InstrumentType::zcb_semi ||
                                        ins.type == InstrumentType::bond_option;
            const bool needs_window = ins.type == InstrumentType::cds || ins.type == InstrumentType::irs ||
                                      ins.type == InstrumentType::cds_swaption;
            const bool needs_expiry =
                ins.type == InstrumentType::bond_option || ins.type == InstrumentType::cds_swaption;
            r.real_into("maturity", ins.maturity, needs_maturity);
            r.real_into("default_horizon", ins.default_horizon, ins.type == InstrumentType::zcb_semi);
            r.real_into("expiry", ins.expiry, needs_expiry);
            // A swaption's underlying starts at expiry unless told otherwise.
            if (ins.type == InstrumentType::cds_swaption && !r.has("start")) ins.start = ins.expiry;
            r.real_into("start", ins.start, needs_window && ins.type != InstrumentType::cds_swaption);
            r.real_into("end", ins.end, needs_window);
            if (ins.type == InstrumentType::bond_option && !ins.strike) r.issue("strike", "missing required key");

            if (needs_maturity && ins.maturity <= 0.0) r.issue("maturity", "must be > 0");
            if (ins.type == InstrumentType::zcb_semi && ins.default_horizon < 0.0) {
                r.issue("default_horizon", "must be >= 0");
            }
            if (needs_window && !(ins.start >= 0.0 && ins.end > ins.start)) {
                r.issue("end", "need 0 <= start < end");
            }
            if (needs_expiry && ins.expiry <= 0.0) r.issue("expiry", "must be > 0");
            if (ins.type == InstrumentType::bond_option && ins.maturity <= ins.expiry) {
                r.issue("maturity", "must be after expiry");
            }
            if (ins.type == InstrumentType::cds_swaption && ins.expiry > ins.start) {
                r.issue("expiry", "must not be after the CDS start");
            }
            if (ins.strike && *ins.strike < 0.0) r.issue("strike", "must be >= 0");
        }
    }

    if (const auto* sec = detail::find_section(root, "model")) {
        SectionReader r(sec, "model",
                        {"kind", "theta", "mu", "sigma", "sigma_after", "switch_time", "x0", "t_step", "band",
                         "severity", "intensity", "convention", "n_nodes", "half_width", "tail_tol"},
                        issues);
        auto& m = cfg.model;
        if (auto k = r.text("kind", false)) {
            if (*k == "ou-severity") {
                m.kind = ModelKind::ou_severity;
            } else if (*k == "fixed-severity") {
                m.kind = ModelKind::fixed_severity;
                m.convention = SurvivalConvention::exp_severity;
            } else {
                r.issue("kind", "must be ou-severity or fixed-severity");
            }
        }
        const bool ou = m.kind == ModelKind::ou_severity;
        if (auto c = r.text("convention", false)) {
            if (auto conv = parse_convention(*c)) {
                m.convention = *conv;
            } else {
                r.issue("convention", "must be exp or one-minus");
            }
        }
        if (auto s = r.text("intensity", true)) {
            if (auto err = detail::parse_curve(*s, m.intensity)) {
                r.issue("intensity", *err);
            } else if (!m.intensity.is_nonnegative()) {
                r.issue("intensity", "must be >= 0");
            }
        }
        if (ou) {
            r.real_into("theta", m.ou.theta, true);
            r.real_into("mu", m.ou.mu, true);
            r.real_into("sigma", m.ou.sigma, true);
            r.real_into("band", m.band, true);
            r.real_into("x0", m.ou.x0, false);
            r.real_into("t_step", m.ou.t_step, false);
            m.sigma_after = r.real("sigma_after", false);
            m.switch_time = r.real("switch_time", false);
            if (r.has("severity")) r.issue("severity", "only used by fixed-severity models");
            if (m.ou.theta < 0.0) r.issue("theta", "must be >= 0");
            if (m.ou.sigma < 0.0) r.issue("sigma", "must be >= 0");
            if (m.ou.t_step <= 0.0) r.issue("t_step", "must be > 0");
            if (m.band < 1.0) r.issue("band", "must be >= 1");
            if (m.sigma_after && *m.sigma_after < 0.0) r.issue("sigma_after", "must be >= 0");
            if (m.switch_time && !m.sigma_after) r.issue("switch_time", "needs sigma_after");
            if (m.switch_time && *m.switch_time < 0.0) r.issue("switch_time", "must be >= 0");
            if (auto n = r.text("n_nodes", false)) {
                auto v = detail::parse_u64(*n);
                if (!v || *v == 0 || *v > 20001) {
                    r.issue("n_nodes", "must be an integer in [1, 20001]");
                } else {
                    m.n_nodes = static_cast<int>(*v);
                }
            }
            r.real_into("half_width", m.half_width, false);
            if (m.half_width <= 0.0) r.issue("half_width", "must be > 0");
        } else {
            r.real_into("severity", m.severity, true);
            if (m.severity < 0.0) r.issue("severity", "must be >= 0");
            for (const char* k : {"theta", "mu", "sigma", "sigma_after", "switch_time", "x0", "t_step", "band",
                                  "n_nodes", "half_width"}) {
                if (r.has(k)) r.issue(k, "only used by ou-severity models");
            }
        }
        r.real_into("tail_tol", m.tail_tol, false);
        if (!(m.tail_tol > 0.0 && m.tail_tol < 1.0)) r.issue("tail_tol", "must be in (0, 1)");
    }

    if (const auto* sec = detail::find_section(root, "market")) {
        SectionReader r(sec, "market", {"rate", "recovery"}, issues);
        if (auto s = r.text("rate", true)) {
            if (auto err = detail::parse_curve(*s, cfg.market.rate)) r.issue("rate", *err);
        }
        const bool needs_recovery =
            type_ok && (cfg.instrument.type == InstrumentType::cds || cfg.instrument.type == InstrumentType::cds_swaption);
        r.real_into("recovery", cfg.market.recovery, needs_recovery);
        if (!(cfg.market.recovery >= 0.0 && cfg.market.recovery <= 1.0)) r.issue("recovery", "must be in [0, 1]");
    }

    if (const auto* sec = detail::find_section(root, "mc")) {
        SectionReader r(sec, "mc", {"paths", "seed", "estimator", "knock_out"}, issues);
        if (auto p = r.text("paths", false)) {
            auto v = detail::parse_u64(*p);
            if (!v || *v < 2) {
                r.issue("paths", "must be an integer >= 2");
            } else {
                cfg.mc.paths = static_cast<std::size_t>(*v);
            }
        }
        if (auto s = r.text("seed", false)) {
            auto v = detail::parse_u64(*s);
            if (!v) {
                r.issue("seed", "must be an unsigned 64-bit integer");
            } else {
                cfg.mc.seed = *v;
            }
        }
        if (auto e = r.text("estimator", false)) {
            if (*e == "pathwise") {
                cfg.mc.estimator = McEstimator::pathwise;
            } else if (*e == "poisson-conditional") {
                cfg.mc.estimator = McEstimator::poisson_conditional;
            } else {
                r.issue("estimator", "must be pathwise or poisson-conditional");
            }
        }
        if (auto k = r.text("knock_out", false)) {
            if (*k == "bernoulli") {
                cfg.mc.knock_out = KnockOut::bernoulli;
            } else if (*k == "survival-weighted") {
                cfg.mc.knock_out = KnockOut::survival_weighted;
            } else {
                r.issue("knock_out", "must be bernoulli or survival-weighted");
            }
        }
    }

    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_string(buf.str());
}

/// Volatility switch implied by the config: explicit switch_time, else the
/// option expiry for options, else none.
inline std::optional<VolSwitch> vol_switch_for(const RunConfig& cfg) {
    if (!cfg.model.sigma_after) return std::nullopt;
    if (cfg.model.switch_time) return VolSwitch{*cfg.model.sigma_after, *cfg.model.switch_time};
    const auto t = cfg.instrument.type;
    if (t == InstrumentType::cds_swaption || t == InstrumentType::bond_option) {
        return VolSwitch{*cfg.model.sigma_after, cfg.instrument.expiry};
    }
    return std::nullopt;
}

/// Spike horizon, in calendar time, the grid must cover.
inline double model_horizon(const RunConfig& cfg) {
    const auto& i = cfg.instrument;
    switch (i.type) {
        case InstrumentType::zcb_defaultable: return i.maturity;
        case InstrumentType::zcb_semi: return std::max(i.maturity, i.default_horizon);
        case InstrumentType::bond_option: return i.maturity;
        default: return i.end;
    }
}

/// State engine sized for the instrument horizon. With a volatility switch,
/// the grid covers the expected spread before and after the switch.
inline StateEngine engine_for(const RunConfig& cfg) {
    const auto& m = cfg.model;
    detail::require(m.kind == ModelKind::ou_severity, ErrorKind::unsupported, "cli",
                    "state engine needs an ou-severity model");
    const auto vs = vol_switch_for(cfg);
    const double horizon = model_horizon(cfg);
    GridSpec grid;
    grid.n_nodes = m.n_nodes;
    grid.half_width = m.half_width;
    if (vs) {
        const double at = std::min(vs->switch_time, horizon);
        grid.max_events = max_events_for(integrate(m.intensity, 0.0, at), m.tail_tol);
        grid.max_events_after = max_events_for(integrate(m.intensity, at, horizon), m.tail_tol);
    } else {
        grid.max_events = max_events_for(integrate(m.intensity, 0.0, horizon), m.tail_tol);
    }
    return build_engine(m.ou, BandTransform{m.band}, grid, m.convention, vs);
}

inline CDSContract contract_for(const RunConfig& cfg) {
    const auto& i = cfg.instrument;
    return CDSContract::make(i.start, i.end, i.premium.value_or(0.0), 1.0 - cfg.market.recovery, i.frequency);
}

}  // namespace dirac
