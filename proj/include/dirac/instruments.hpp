#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dirac/analytic.hpp"
#include "dirac/curves.hpp"
#include "dirac/error.hpp"
#include "dirac/ou_state.hpp"

namespace dirac {

/// Day index on the 1/365 grid nearest to t (years).
inline int to_day(double t) { return static_cast<int>(std::lround(t * kDaysPerYear)); }
inline double from_day(int day) { return static_cast<double>(day) / kDaysPerYear; }

/// Single-name CDS on the daily grid. Protection runs over the daily partition
/// of [start, end]; premiums are paid on `premium_days` with exact day-count
/// accruals. Accrual on default is ignored.
struct CDSContract {
    int start_day = 0;
    int end_day = 0;
    std::vector<int> premium_days;
    double premium = 0.0;  // R, per year
    double lgd = 0.6;

    static CDSContract make(double start, double end, double premium, double lgd, int frequency = 4) {
        detail::require(start >= 0.0 && end > start, ErrorKind::ordering, "instruments",
                        "CDS needs 0 <= start < end");
        detail::require(frequency > 0, ErrorKind::parameter, "instruments", "premium frequency must be > 0");
        CDSContract c;
        c.start_day = to_day(start);
        c.end_day = to_day(end);
        detail::require(c.end_day > c.start_day, ErrorKind::ordering, "instruments",
                        "CDS window shorter than one day");
        c.premium = premium;
        c.lgd = lgd;
        const int days = c.end_day - c.start_day;
        const int periods = std::max(1, static_cast<int>(std::lround((end - start) * frequency)));
        for (int i = 1; i <= periods; ++i) {
            c.premium_days.push_back(c.start_day +
                                     static_cast<int>(std::lround(static_cast<double>(i) * days / periods)));
        }
        c.validate();
        return c;
    }

    double start() const noexcept { return from_day(start_day); }
    double end() const noexcept { return from_day(end_day); }
    double premium_time(std::size_t i) const { return from_day(premium_days[i]); }
    double accrual(std::size_t i) const {
        const int prev = i == 0 ? start_day : premium_days[i - 1];
        return static_cast<double>(premium_days[i] - prev) / kDaysPerYear;
    }

    void validate() const {
        using detail::require;
        require(start_day >= 0 && end_day > start_day, ErrorKind::ordering, "instruments",
                "CDS needs 0 <= start < end");
        require(lgd >= 0.0 && lgd <= 1.0, ErrorKind::parameter, "instruments", "LGD must be in [0,1]");
        require(!premium_days.empty() && premium_days.back() == end_day, ErrorKind::parameter, "instruments",
                "premium schedule must end at protection end");
        int prev = start_day;
        for (int d : premium_days) {
            require(d > prev, ErrorKind::parameter, "instruments", "premium accruals must be > 0");
            prev = d;
        }
    }
};

/// P(0, T1, T2): discount to T1, default exposure to T2.
using SemiDefaultablePricer = std::function<double(double T1, double T2)>;

struct CdsLegs {
    double protection = 0.0;
    double premium = 0.0;  // R * annuity
    double annuity = 0.0;  // sum alpha_i P(0, T_i)
    double value() const noexcept { return protection - premium; }
};

/// Protection pays LGD on the day of default: sum over days of
/// P(0,T_d,T_{d-1}) - P(0,T_d), the discounted probability of defaulting on day d.
inline CdsLegs cds_legs(const CDSContract& contract, const SemiDefaultablePricer& pricer) {
    contract.validate();
    CdsLegs legs;
    for (int d = contract.start_day + 1; d <= contract.end_day; ++d) {
        const double td = from_day(d);
        legs.protection += pricer(td, from_day(d - 1)) - pricer(td, td);
    }
    legs.protection *= contract.lgd;
    for (std::size_t i = 0; i < contract.premium_days.size(); ++i) {
        const double ti = contract.premium_time(i);
        legs.annuity += contract.accrual(i) * pricer(ti, ti);
    }
    legs.premium = contract.premium * legs.annuity;
    return legs;
}

/// Premium rate that zeroes the CDS value.
inline double cds_par_spread(const CDSContract& contract, const SemiDefaultablePricer& pricer) {
    const CdsLegs legs = cds_legs(contract, pricer);
    if (!(legs.annuity > 0.0)) {
        detail::fail(ErrorKind::degenerate, "instruments", "risky annuity is zero; par spread undefined");
    }
    return legs.protection / legs.annuity;
}

inline SemiDefaultablePricer make_fixed_severity_pricer(FixedSeverityDirac sev, PiecewiseFlatCurve discount) {
    sev.validate();
    return [sev = std::move(sev), discount = std::move(discount)](double T1, double T2) {
        return semi_defaultable_zcb_fixed(sev, discount, 0.0, T1, T2);
    };
}

/// Time-0 survival term structure of a state engine, from precomputed
/// contracted Poisson bases so each maturity costs O(N_max).
class OuSurvivalCurve {
public:
    OuSurvivalCurve(const StateEngine& engine, PiecewiseFlatCurve zeta, double horizon,
                    double tail_tol = kDefaultTailTol)
        : zeta_(std::move(zeta)), tail_tol_(tail_tol) {
        detail::require(zeta_.is_nonnegative(), ErrorKind::parameter, "instruments", "intensity must be >= 0");
        detail::require(horizon >= 0.0, ErrorKind::parameter, "instruments", "horizon must be >= 0");
        switch_ = engine.transition_after && engine.switch_time ? *engine.switch_time : horizon;
        const double first_end = std::min(switch_, horizon);
        SurvivalBasis first(engine, Regime::before_switch, integrate(zeta_, 0.0, first_end), tail_tol);
        before_ = (engine.initial * first.basis()).transpose();
        if (horizon > switch_) {
            const double lambda_first = integrate(zeta_, 0.0, switch_);
            const Eigen::RowVectorXd r = poisson_sum_row(engine.initial, engine.transition, engine.survival,
                                                         poisson_weights(lambda_first, tail_tol));
            SurvivalBasis second(engine, Regime::after_switch, integrate(zeta_, switch_, horizon), tail_tol);
            after_ = (r * second.basis()).transpose();
        }
    }

    double survival(double T) const {
        detail::require(T >= 0.0, ErrorKind::ordering, "instruments", "maturity must be >= 0");
        if (T <= switch_) return contract(before_, integrate(zeta_, 0.0, T));
        detail::require(after_.size() > 0, ErrorKind::parameter, "instruments", "maturity beyond survival horizon");
        return contract(after_, integrate(zeta_, switch_, T));
    }

private:
    double contract(const Eigen::VectorXd& scalars, double lambda) const {
        const auto w = poisson_weights(lambda, tail_tol_);
        detail::require(static_cast<Eigen::Index>(w.size()) <= scalars.size(), ErrorKind::parameter, "instruments",
                        "maturity beyond survival horizon");
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * scalars(static_cast<Eigen::Index>(i));
        return s;
    }

    PiecewiseFlatCurve zeta_;
    double tail_tol_;
    double switch_ = 0.0;
    Eigen::VectorXd before_;
    Eigen::VectorXd after_;
};

inline SemiDefaultablePricer make_ou_pricer(const StateEngine& engine, PiecewiseFlatCurve discount,
                                            PiecewiseFlatCurve zeta, double horizon,
                                            double tail_tol = kDefaultTailTol) {
    auto curve = std::make_shared<const OuSurvivalCurve>(engine, zeta, horizon, tail_tol);
    return [curve, discount = std::move(discount)](double T1, double T2) {
        return discount_factor(discount, 0.0, T1) * curve->survival(T2);
    };
}

/// Single-curve interest rate swap: floating leg DF(start) - DF(end), fixed leg
/// paid on `payment_times` with accruals between consecutive dates.
struct IrsSchedule {
    double start = 0.0;
    std::vector<double> payment_times;

    static IrsSchedule regular(double start, double end, int frequency) {
        detail::require(end > start && frequency > 0, ErrorKind::ordering, "instruments", "bad swap schedule");
        IrsSchedule s{start, {}};
        const int periods = std::max(1, static_cast<int>(std::lround((end - start) * frequency)));
        for (int i = 1; i <= periods; ++i) s.payment_times.push_back(start + (end - start) * i / periods);
        return s;
    }
};

struct IrsLegs {
    double floating = 0.0;
    double fixed = 0.0;
    double annuity = 0.0;
    double value() const noexcept { return floating - fixed; }  // payer
};

inline IrsLegs irs_legs(double fixed_rate, const IrsSchedule& schedule, const PiecewiseFlatCurve& discount) {
    detail::require(!schedule.payment_times.empty(), ErrorKind::parameter, "instruments", "empty swap schedule");
    double prev = schedule.start;
    IrsLegs legs;
    for (double t : schedule.payment_times) {
        detail::require(t > prev, ErrorKind::ordering, "instruments", "swap payment times must ascend");
        legs.annuity += (t - prev) * discount_factor(discount, 0.0, t);
        prev = t;
    }
    legs.floating = discount_factor(discount, 0.0, schedule.start) - discount_factor(discount, 0.0, prev);
    legs.fixed = fixed_rate * legs.annuity;
    return legs;
}

inline double irs_value(double fixed_rate, const IrsSchedule& schedule, const PiecewiseFlatCurve& discount) {
    return irs_legs(fixed_rate, schedule, discount).value();
}

inline double irs_par_rate(const IrsSchedule& schedule, const PiecewiseFlatCurve& discount) {
    const IrsLegs legs = irs_legs(0.0, schedule, discount);
    return legs.floating / legs.annuity;
}

/// Per-state CDS legs valued at `valuation_time`, conditional on the driver
/// sitting at each grid node. Spikes after the valuation time use the
/// engine's post-switch transition when it has one.
struct ForwardCdsLegs {
    double valuation_time = 0.0;
    Eigen::VectorXd protection;
    Eigen::VectorXd annuity;
};

inline ForwardCdsLegs forward_cds_legs(const StateEngine& engine, const CDSContract& contract,
                                       double valuation_time, const PiecewiseFlatCurve& discount,
                                       const PiecewiseFlatCurve& zeta, double tail_tol = kDefaultTailTol) {
    contract.validate();
    detail::require(valuation_time >= 0.0 && valuation_time <= contract.start() + 1e-12, ErrorKind::unsupported,
                    "instruments", "forward legs need valuation time <= protection start");
    detail::require(zeta.is_nonnegative(), ErrorKind::parameter, "instruments", "intensity must be >= 0");
    const double tv = std::min(valuation_time, contract.start());
    const Regime regime = engine.transition_after ? Regime::after_switch : Regime::before_switch;
    const SurvivalBasis basis(engine, regime, integrate(zeta, tv, contract.end()), tail_tol);

    const Eigen::Index k = basis.basis().cols();
    Eigen::VectorXd prot_coeff = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd ann_coeff = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd w_prev = basis.weights(integrate(zeta, tv, contract.start()));
    for (int d = contract.start_day + 1; d <= contract.end_day; ++d) {
        const double td = from_day(d);
        Eigen::VectorXd w_now = basis.weights(integrate(zeta, tv, td));
        prot_coeff += discount_factor(discount, tv, td) * (w_prev - w_now);
        w_prev = std::move(w_now);
    }
    for (std::size_t i = 0; i < contract.premium_days.size(); ++i) {
        const double ti = contract.premium_time(i);
        ann_coeff += contract.accrual(i) * discount_factor(discount, tv, ti) * basis.weights(integrate(zeta, tv, ti));
    }
    ForwardCdsLegs legs;
    legs.valuation_time = tv;
    legs.protection = contract.lgd * (basis.basis() * prot_coeff);
    legs.annuity = basis.basis() * ann_coeff;
    return legs;
}

namespace detail {

inline void require_switch_at(const StateEngine& engine, double expiry) {
    if (engine.transition_after && engine.switch_time) {
        require(std::abs(*engine.switch_time - expiry) <= 1e-12, ErrorKind::unsupported, "instruments",
                "option pricing needs the volatility switch at the exercise date");
    }
}

}  // namespace detail

enum class OptionType { call, put };

struct BondOptionSpec {
    double strike = 0.0;
    double expiry = 0.0;
    double maturity = 0.0;
    OptionType type = OptionType::call;
};

/// European option on a zero coupon bond whose short rate (or hazard) carries
/// Dirac-OU-severity spikes. The payoff is evaluated per state at expiry and
/// rolled back jointly over spike count and state path.
inline double bond_option_ou(const StateEngine& engine, const BondOptionSpec& spec, const PiecewiseFlatCurve& zeta,
                             const PiecewiseFlatCurve& discount, double t = 0.0,
                             double tail_tol = kDefaultTailTol) {
    detail::require(t >= 0.0 && t < spec.expiry && spec.expiry < spec.maturity, ErrorKind::ordering, "instruments",
                    "bond option needs t < expiry < maturity");
    detail::require(spec.strike >= 0.0, ErrorKind::parameter, "instruments", "strike must be >= 0");
    detail::require(zeta.is_nonnegative(), ErrorKind::parameter, "instruments", "intensity must be >= 0");
    detail::require_switch_at(engine, spec.expiry);

    const Regime later = engine.transition_after ? Regime::after_switch : Regime::before_switch;
    Eigen::VectorXd bond = discount_factor(discount, spec.expiry, spec.maturity) *
                           conditional_survival_vector(engine, integrate(zeta, spec.expiry, spec.maturity), later,
                                                       tail_tol);
    const Eigen::VectorXd strike = Eigen::VectorXd::Constant(bond.size(), spec.strike);
    const Eigen::VectorXd payoff = spec.type == OptionType::call ? (bond - strike).cwiseMax(0.0).eval()
                                                                 : (strike - bond).cwiseMax(0.0).eval();
    const auto w = poisson_weights(integrate(zeta, t, spec.expiry), tail_tol);
    return discount_factor(discount, t, spec.expiry) *
           engine.initial.dot(poisson_sum(engine.transition, engine.survival, w, payoff));
}

/// Payer CDS swaption prices for a set of strikes, plus the time-0 forward
/// protection value, risky annuity and forward spread that define the
/// market-model quote.
struct SwaptionPrices {
    std::vector<double> strikes;
    std::vector<double> prices;
    double protection = 0.0;
    double annuity = 0.0;
    double forward_spread = 0.0;
    ForwardCdsLegs legs;
};

/// Exercise at `expiry` into the CDS `contract` (premium field ignored). The
/// reference entity must survive to expiry: knock-out enters through the
/// per-spike survival factors of the pre-expiry Poisson sum.
inline SwaptionPrices cds_swaption(const StateEngine& engine, const CDSContract& contract, double expiry,
                                   const PiecewiseFlatCurve& discount, const PiecewiseFlatCurve& zeta,
                                   std::span<const double> strikes, double tail_tol = kDefaultTailTol) {
    detail::require(expiry > 0.0, ErrorKind::ordering, "instruments", "swaption expiry must be > 0");
    if (expiry > contract.start() + 1e-12) {
        detail::fail(ErrorKind::unsupported, "instruments", "swaption into a seasoned CDS (expiry after start)");
    }
    detail::require_switch_at(engine, expiry);

    SwaptionPrices out;
    out.legs = forward_cds_legs(engine, contract, expiry, discount, zeta, tail_tol);
    const Eigen::RowVectorXd state_prices =
        discount_factor(discount, 0.0, expiry) *
        poisson_sum_row(engine.initial, engine.transition, engine.survival,
                        poisson_weights(integrate(zeta, 0.0, expiry), tail_tol));
    out.protection = state_prices.dot(out.legs.protection);
    out.annuity = state_prices.dot(out.legs.annuity);
    out.forward_spread = out.annuity > 0.0 ? out.protection / out.annuity : 0.0;
    out.strikes.assign(strikes.begin(), strikes.end());
    for (double k : strikes) {
        const Eigen::VectorXd payoff = (out.legs.protection - k * out.legs.annuity).cwiseMax(0.0);
        out.prices.push_back(state_prices.dot(payoff));
    }
    return out;
}

inline double cds_swaption(const StateEngine& engine, const CDSContract& contract, double expiry,
                           const PiecewiseFlatCurve& discount, const PiecewiseFlatCurve& zeta, double strike,
                           double tail_tol = kDefaultTailTol) {
    const double k[] = {strike};
    return cds_swaption(engine, contract, expiry, discount, zeta, k, tail_tol).prices.front();
}

}  // namespace dirac
