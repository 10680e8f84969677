#pragma once

// Command-line front end for the dirac pricing library.
//
//   dirac_pricer price <instrument> --config FILE [--out CSV]
//   dirac_pricer simulate           --config FILE [--paths N] [--seed S] [--out CSV]
//   dirac_pricer smile              --config FILE [--strikes LIST] [--out CSV]
//   dirac_pricer oracle-compare     --config FILE [--paths N] [--seed S] [--out CSV]
//   dirac_pricer dump-engine        --config FILE [--out CSV]
//
// Failures print one line "error: module=... kind=... message=..." on stderr
// and return a nonzero exit code.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dirac/dirac.hpp"

namespace dirac::app {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) { add(std::move(header)); }

    void add(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
        text_ += '\n';
    }
    const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::string> strikes;
    std::optional<std::string> convention;
    std::string instrument;
};

/// Worker cap from DIRAC_PRICER_THREADS; 0 means all hardware threads.
inline unsigned worker_threads() {
    const char* env = std::getenv("DIRAC_PRICER_THREADS");
    if (!env || !*env) return 0;
    const auto v = detail::parse_u64(env);
    if (!v || *v == 0) throw ConfigError({"DIRAC_PRICER_THREADS must be a positive integer"});
    return static_cast<unsigned>(std::min<std::uint64_t>(*v, 4096));
}

class Runner {
public:
    Runner(const Options& opts, std::ostream& out) : opts_(opts), out_(out) {
        cfg_ = parse_config(opts.config);
        if (opts.convention) {
            auto c = parse_convention(*opts.convention);
            if (!c) throw ConfigError({"--convention must be exp or one-minus"});
            cfg_.model.convention = *c;
        }
        if (opts.seed) cfg_.mc.seed = *opts.seed;
        if (opts.paths) {
            if (*opts.paths < 2) throw ConfigError({"--paths must be >= 2"});
            cfg_.mc.paths = *opts.paths;
        }
        if (opts.strikes) {
            auto v = detail::parse_real_list(*opts.strikes);
            if (!v || std::any_of(v->begin(), v->end(), [](double m) { return m <= 0.0; })) {
                throw ConfigError({"--strikes must be a comma-separated list of positive strike multiples"});
            }
            cfg_.instrument.strike_multiples = *v;
        }
    }

    void price() {
        const auto& ins = cfg_.instrument;
        if (opts_.instrument != to_string(ins.type)) {
            throw ConfigError({"price " + opts_.instrument + " requested but the config describes " +
                               std::string(to_string(ins.type))});
        }
        const auto& disc = cfg_.market.rate;
        switch (ins.type) {
            case InstrumentType::zcb_defaultable:
            case InstrumentType::zcb_semi: {
                const double T2 = ins.type == InstrumentType::zcb_semi ? ins.default_horizon : ins.maturity;
                const double p = zcb(ins.maturity, T2);
                kv({{"instrument", to_string(ins.type)}, {"price", fmt(p)}});
                CsvTable t({"instrument", "maturity", "default_horizon", "price"});
                t.add({to_string(ins.type), fmt(ins.maturity), fmt(T2), fmt(p)});
                emit_file(t);
                break;
            }
            case InstrumentType::cds: {
                const CDSContract c = contract_for(cfg_);
                const CdsLegs legs = cds_legs(c, semi_pricer(ins.end));
                const double par = legs.annuity > 0.0 ? legs.protection / legs.annuity : 0.0;
                kv({{"instrument", "cds"},
                    {"value", fmt(legs.value())},
                    {"protection", fmt(legs.protection)},
                    {"premium", fmt(legs.premium)},
                    {"annuity", fmt(legs.annuity)},
                    {"par_spread", fmt(par)}});
                CsvTable t({"instrument", "premium_rate", "protection", "premium", "annuity", "value", "par_spread"});
                t.add({"cds", fmt(c.premium), fmt(legs.protection), fmt(legs.premium), fmt(legs.annuity),
                       fmt(legs.value()), fmt(par)});
                emit_file(t);
                break;
            }
            case InstrumentType::irs: {
                const auto sched = IrsSchedule::regular(ins.start, ins.end, ins.frequency);
                const double par = irs_par_rate(sched, disc);
                const double k = ins.fixed_rate.value_or(par);
                const IrsLegs legs = irs_legs(k, sched, disc);
                kv({{"instrument", "irs"},
                    {"value", fmt(legs.value())},
                    {"floating", fmt(legs.floating)},
                    {"fixed", fmt(legs.fixed)},
                    {"annuity", fmt(legs.annuity)},
                    {"par_rate", fmt(par)}});
                CsvTable t({"instrument", "fixed_rate", "floating", "fixed", "annuity", "value", "par_rate"});
                t.add({"irs", fmt(k), fmt(legs.floating), fmt(legs.fixed), fmt(legs.annuity), fmt(legs.value()),
                       fmt(par)});
                emit_file(t);
                break;
            }
            case InstrumentType::bond_option: {
                const StateEngine e = engine_for(cfg_);
                const BondOptionSpec spec{*ins.strike, ins.expiry, ins.maturity, ins.option};
                const double p = bond_option_ou(e, spec, cfg_.model.intensity, disc, 0.0, cfg_.model.tail_tol);
                const char* kind = ins.option == OptionType::call ? "call" : "put";
                kv({{"instrument", "bond-option"}, {"option", kind}, {"price", fmt(p)}});
                CsvTable t({"instrument", "option", "strike", "expiry", "maturity", "price"});
                t.add({"bond-option", kind, fmt(spec.strike), fmt(spec.expiry), fmt(spec.maturity), fmt(p)});
                emit_file(t);
                break;
            }
            case InstrumentType::cds_swaption: {
                const StateEngine e = engine_for(cfg_);
                const double none[] = {0.0};
                const SwaptionPrices base = cds_swaption(e, contract_for(cfg_), ins.expiry, disc,
                                                         cfg_.model.intensity, none, cfg_.model.tail_tol);
                const double k = ins.strike.value_or(base.forward_spread);
                const double strikes[] = {k};
                const double p = cds_swaption(e, contract_for(cfg_), ins.expiry, disc, cfg_.model.intensity, strikes,
                                              cfg_.model.tail_tol)
                                     .prices.front();
                kv({{"instrument", "cds-swaption"},
                    {"strike", fmt(k)},
                    {"price", fmt(p)},
                    {"forward_spread", fmt(base.forward_spread)},
                    {"annuity", fmt(base.annuity)}});
                CsvTable t({"instrument", "expiry", "start", "end", "strike", "forward_spread", "annuity", "price"});
                t.add({"cds-swaption", fmt(ins.expiry), fmt(ins.start), fmt(ins.end), fmt(k),
                       fmt(base.forward_spread), fmt(base.annuity), fmt(p)});
                emit_file(t);
                break;
            }
        }
    }

    void simulate() {
        const HazardSpec hazard = hazard_spec();
        const double horizon = model_horizon(cfg_);
        detail::require(horizon > 0.0, ErrorKind::parameter, "cli", "instrument horizon must be > 0");
        const std::size_t n = opts_.paths.value_or(10);
        CsvTable t({"path_id", "event_time", "severity"});
        for (std::size_t p = 0; p < n; ++p) {
            PathRng rng(cfg_.mc.seed, p);
            const EventPath path = simulate_hazard_path(hazard, horizon, rng);
            for (std::size_t i = 0; i < path.event_times.size(); ++i) {
                t.add({std::to_string(p), fmt(path.event_times[i]), fmt(path.severities[i])});
            }
        }
        emit_table(t);
    }

    void smile() {
        require_type(InstrumentType::cds_swaption, "smile");
        const SwaptionModel model{engine_for(cfg_),       contract_for(cfg_),   cfg_.instrument.expiry,
                                  cfg_.market.rate,       cfg_.model.intensity, cfg_.model.tail_tol};
        const auto rows = dirac::smile(model, cfg_.instrument.strike_multiples);
        CsvTable t({"strike", "forward", "price", "implied_vol", "flag"});
        for (const auto& r : rows) {
            t.add({fmt(r.strike), fmt(r.forward), fmt(r.price), fmt(r.implied_vol), std::string(to_string(r.flag))});
        }
        emit_table(t);
    }

    void oracle_compare() {
        const auto& ins = cfg_.instrument;
        const McOptions mc{cfg_.mc.paths, cfg_.mc.seed, worker_threads()};
        CsvTable t({"instrument", "strike", "analytic", "mc_mean", "std_error", "z_score"});
        auto row = [&](const std::string& strike, double analytic, const MCResult& r) {
            t.add({to_string(ins.type), strike, fmt(analytic), fmt(r.estimate), fmt(r.std_error),
                   fmt(r.z_score(analytic))});
        };
        switch (ins.type) {
            case InstrumentType::zcb_defaultable:
            case InstrumentType::zcb_semi: {
                const double T2 = ins.type == InstrumentType::zcb_semi ? ins.default_horizon : ins.maturity;
                const MCResult r = mc_semi_defaultable_zcb(hazard_spec(), cfg_.market.rate, ins.maturity, T2, mc,
                                                           cfg_.model.convention, cfg_.mc.estimator);
                row("", zcb(ins.maturity, T2), r);
                break;
            }
            case InstrumentType::cds_swaption: {
                const StateEngine e = engine_for(cfg_);
                const CDSContract c = contract_for(cfg_);
                const double none[] = {0.0};
                const double fwd =
                    cds_swaption(e, c, ins.expiry, cfg_.market.rate, cfg_.model.intensity, none, cfg_.model.tail_tol)
                        .forward_spread;
                std::vector<double> strikes;
                if (ins.strike) {
                    strikes.push_back(*ins.strike);
                } else {
                    for (double m : ins.strike_multiples) strikes.push_back(m * fwd);
                }
                std::sort(strikes.begin(), strikes.end());
                const SwaptionPrices a =
                    cds_swaption(e, c, ins.expiry, cfg_.market.rate, cfg_.model.intensity, strikes, cfg_.model.tail_tol);
                const auto r = mc_cds_swaption(e, c, ins.expiry, cfg_.market.rate, cfg_.model.intensity, strikes, mc,
                                               cfg_.mc.knock_out, cfg_.model.tail_tol);
                for (std::size_t i = 0; i < strikes.size(); ++i) row(fmt(strikes[i]), a.prices[i], r[i]);
                break;
            }
            default:
                detail::fail(ErrorKind::unsupported, "cli",
                             std::string("no Monte Carlo oracle for instrument ") + to_string(ins.type));
        }
        emit_table(t);
    }

    void dump_engine() {
        const StateEngine e = engine_for(cfg_);
        const bool after = e.transition_after.has_value();
        std::vector<std::string> header{"node", "x", "severity", "survival", "initial", "row_sum"};
        if (after) header.push_back("row_sum_after");
        CsvTable t(header);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(e.size()); ++i) {
            std::vector<std::string> cells{std::to_string(i),
                                           fmt(e.nodes[static_cast<std::size_t>(i)]),
                                           fmt(e.severity(i)),
                                           fmt(e.survival(i)),
                                           fmt(e.initial(i)),
                                           fmt(e.transition.row(i).sum())};
            if (after) cells.push_back(fmt(e.transition_after->row(i).sum()));
            t.add(cells);
        }
        emit_table(t);
    }

private:
    HazardSpec hazard_spec() const {
        const auto& m = cfg_.model;
        if (m.kind == ModelKind::fixed_severity) return FixedSeverityDirac{m.intensity, m.severity};
        return OuSeverityHazard{m.ou, BandTransform{m.band}, m.intensity, vol_switch_for(cfg_)};
    }

    /// P(0, T1, T2) under the configured model.
    double zcb(double T1, double T2) const { return semi_pricer(std::max(T1, T2))(T1, T2); }

    SemiDefaultablePricer semi_pricer(double horizon) const {
        const auto& m = cfg_.model;
        if (m.kind == ModelKind::fixed_severity) {
            // One-minus survival 1 - s per spike equals exp-severity -log(1 - s).
            double s = m.severity;
            if (m.convention == SurvivalConvention::one_minus_severity) {
                detail::require(s <= 1.0, ErrorKind::convention, "cli", "one-minus severity must lie in [0, 1]");
                s = -std::log1p(-s);
            }
            return make_fixed_severity_pricer(FixedSeverityDirac{m.intensity, s}, cfg_.market.rate);
        }
        return make_ou_pricer(engine_for(cfg_), cfg_.market.rate, m.intensity, horizon, m.tail_tol);
    }

    void require_type(InstrumentType t, const char* command) const {
        if (cfg_.instrument.type != t) {
            throw ConfigError({std::string(command) + " needs instrument type " + to_string(t)});
        }
    }

    void kv(const std::vector<std::pair<std::string, std::string>>& pairs) {
        for (const auto& [k, v] : pairs) out_ << k << " = " << v << '\n';
    }

    void emit_file(const CsvTable& t) {
        if (!opts_.out.empty()) write_file(t);
    }

    void emit_table(const CsvTable& t) {
        if (opts_.out.empty()) {
            out_ << t.text();
        } else {
            write_file(t);
        }
    }

    void write_file(const CsvTable& t) {
        std::ofstream f(opts_.out, std::ios::binary);
        f << t.text();
        if (!f) detail::fail(ErrorKind::config, "cli", "cannot write output file '" + opts_.out + "'");
    }

    Options opts_;
    std::ostream& out_;
    RunConfig cfg_;
};

inline void report(std::ostream& err, const Error& e) {
    err << "error: module=" << e.module() << " kind=" << to_string(e.kind()) << " message=" << e.what() << '\n';
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dirac-process pricing: bonds, CDS, bond options and CDS swaptions"};
    app.require_subcommand(1);
    Options opts;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "INI run configuration")->required();
        sub->add_option("--out", opts.out, "write CSV output to this path");
        sub->add_option("--convention", opts.convention, "survival per spike: exp or one-minus");
    };
    auto mc_flags = [&](CLI::App* sub) {
        sub->add_option("--seed", opts.seed, "Monte Carlo seed");
        sub->add_option("--paths", opts.paths, "Monte Carlo path count");
    };

    auto* price = app.add_subcommand("price", "price the configured instrument");
    price->add_option("instrument", opts.instrument, "zcb-defaultable | zcb-semi | cds | irs | bond-option | cds-swaption")
        ->required();
    common(price);
    auto* simulate = app.add_subcommand("simulate", "per-path spike times and severities");
    common(simulate);
    mc_flags(simulate);
    auto* smile = app.add_subcommand("smile", "swaption prices and implied volatilities across strikes");
    common(smile);
    smile->add_option("--strikes", opts.strikes, "strike multiples of the forward spread, comma-separated");
    auto* oracle = app.add_subcommand("oracle-compare", "state-space or closed form against Monte Carlo");
    common(oracle);
    mc_flags(oracle);
    oracle->add_option("--strikes", opts.strikes, "strike multiples of the forward spread, comma-separated");
    auto* dump = app.add_subcommand("dump-engine", "grid nodes, severities and transition row sums");
    common(dump);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: module=cli kind=usage message=" << e.what() << '\n';
        return 2;
    }

    try {
        Runner r(opts, out);
        if (price->parsed()) r.price();
        if (simulate->parsed()) r.simulate();
        if (smile->parsed()) r.smile();
        if (oracle->parsed()) r.oracle_compare();
        if (dump->parsed()) r.dump_engine();
    } catch (const ConfigError& e) {
        report(err, e);
        for (const auto& issue : e.issues()) err << "  " << issue << '\n';
        return 2;
    } catch (const Error& e) {
        report(err, e);
        return 1;
    } catch (const std::exception& e) {
        err << "error: module=cli kind=internal message=" << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace dirac::app
