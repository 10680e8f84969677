#pragma once

// Lognormal CDS-option market model: the forward spread is lognormal under
// the risky-annuity measure, so a payer swaption is annuity * Black(F, K).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "dirac/error.hpp"
#include "dirac/instruments.hpp"
#include "dirac/ou_state.hpp"

namespace dirac {

/// Standard normal CDF via the complementary error function.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double black_payer(double forward, double strike, double sigma, double expiry, double annuity) {
    using detail::require;
    require(forward > 0.0 && strike > 0.0, ErrorKind::parameter, "implied_vol", "forward and strike must be > 0");
    require(annuity > 0.0 && expiry > 0.0, ErrorKind::parameter, "implied_vol", "annuity and expiry must be > 0");
    require(sigma >= 0.0, ErrorKind::parameter, "implied_vol", "volatility must be >= 0");
    const double intrinsic = std::max(forward - strike, 0.0);
    if (sigma == 0.0) return annuity * intrinsic;
    if (std::isinf(sigma)) return annuity * forward;
    const double s = sigma * std::sqrt(expiry);
    const double d1 = std::log(forward / strike) / s + 0.5 * s;
    const double d2 = d1 - s;
    // In the money, add the out-of-the-money receiver value to intrinsic so
    // that small time values are not lost to cancellation.
    if (forward > strike) {
        return annuity * (intrinsic + strike * norm_cdf(-d2) - forward * norm_cdf(-d1));
    }
    return annuity * (forward * norm_cdf(d1) - strike * norm_cdf(d2));
}

/// Relative to annuity * forward, time value below this is indistinguishable
/// from rounding in an in-the-money price and is treated as intrinsic.
inline constexpr double kIntrinsicResolution = 1e-14;

/// Volatility reproducing `price` under black_payer. Returns 0 when the price
/// equals intrinsic value to within rounding.
inline double implied_vol(double price, double forward, double strike, double expiry, double annuity) {
    const double intrinsic = annuity * std::max(forward - strike, 0.0);
    const double upper = annuity * forward;
    const double scale = annuity * forward;
    if (!(price >= intrinsic - kIntrinsicResolution * scale)) {
        detail::fail(ErrorKind::no_solution, "implied_vol", "price below intrinsic value");
    }
    if (!(price < upper)) {
        detail::fail(ErrorKind::no_solution, "implied_vol", "price at or above the forward upper bound");
    }
    if (price <= intrinsic) return 0.0;
    if (intrinsic > 0.0 && price - intrinsic <= kIntrinsicResolution * scale) return 0.0;

    auto f = [&](double sigma) { return black_payer(forward, strike, sigma, expiry, annuity) - price; };
    double lo = 0.0, flo = intrinsic - price;
    double hi = 1.0, fhi = f(hi);
    while (fhi < 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        if (hi > 1e6) detail::fail(ErrorKind::no_solution, "implied_vol", "cannot bracket the implied volatility");
        fhi = f(hi);
    }
    if (fhi == 0.0) return hi;

    // Bisection safeguarding a regula falsi step; a bisection is forced
    // whenever the previous step failed to halve the bracket.
    bool force_bisect = false;
    for (int iter = 0; iter < 400; ++iter) {
        const double width = hi - lo;
        if (width <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        double x = 0.5 * (lo + hi);
        if (!force_bisect && fhi != flo) {
            const double secant = hi - fhi * (hi - lo) / (fhi - flo);
            if (secant > lo && secant < hi) x = secant;
        }
        const double fx = f(x);
        if (fx == 0.0) return x;
        if (fx < 0.0) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        force_bisect = (hi - lo) > 0.5 * width;
    }
    return std::abs(flo) < std::abs(fhi) ? lo : hi;
}

/// Everything a 1-into-N payer swaption smile needs from the model.
struct SwaptionModel {
    StateEngine engine;
    CDSContract contract;  // forward CDS, premium ignored
    double expiry = 1.0;
    PiecewiseFlatCurve discount;
    PiecewiseFlatCurve zeta;
    double tail_tol = kDefaultTailTol;
};

enum class SmileFlag { ok, intrinsic, no_solution };

inline std::string_view to_string(SmileFlag flag) noexcept {
    switch (flag) {
        case SmileFlag::ok: return "ok";
        case SmileFlag::intrinsic: return "intrinsic";
        case SmileFlag::no_solution: return "no-solution";
    }
    return "unknown";
}

struct SmileRow {
    double strike = 0.0;
    double forward = 0.0;
    double annuity = 0.0;
    double price = 0.0;
    double implied_vol = 0.0;
    SmileFlag flag = SmileFlag::ok;
};

/// Model prices at strikes `multiples * F` and their market-model implied
/// volatilities, strike-ascending. Rows that cannot be inverted are flagged.
inline std::vector<SmileRow> smile(const SwaptionModel& model, std::span<const double> multiples) {
    const double none[] = {0.0};
    const SwaptionPrices base =
        cds_swaption(model.engine, model.contract, model.expiry, model.discount, model.zeta, none, model.tail_tol);
    detail::require(base.annuity > 0.0 && base.forward_spread > 0.0, ErrorKind::degenerate, "implied_vol",
                    "forward spread or annuity is zero; smile undefined");
    std::vector<double> sorted(multiples.begin(), multiples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> strikes;
    for (double m : sorted) {
        detail::require(m > 0.0, ErrorKind::parameter, "implied_vol", "strike multiples must be > 0");
        strikes.push_back(m * base.forward_spread);
    }
    const SwaptionPrices priced =
        cds_swaption(model.engine, model.contract, model.expiry, model.discount, model.zeta, strikes, model.tail_tol);

    std::vector<SmileRow> rows;
    for (std::size_t i = 0; i < strikes.size(); ++i) {
        SmileRow row{strikes[i], base.forward_spread, base.annuity, priced.prices[i], 0.0, SmileFlag::ok};
        try {
            row.implied_vol = implied_vol(row.price, row.forward, row.strike, model.expiry, row.annuity);
            if (row.implied_vol == 0.0) row.flag = SmileFlag::intrinsic;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::no_solution) throw;
            row.implied_vol = std::numeric_limits<double>::quiet_NaN();
            row.flag = SmileFlag::no_solution;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace dirac
