#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dirac/error.hpp"

namespace dirac {

/// Days per year on the calendar grid used by every schedule.
inline constexpr double kDaysPerYear = 365.0;

/// Piecewise-flat deterministic function of time (years).
///
/// `values[i]` applies on [breakpoints[i], breakpoints[i+1]); the first value
/// also covers [0, breakpoints[0]) and the last value extends flat to infinity.
/// Used both for discount short rates and for spike intensities.
class PiecewiseFlatCurve {
public:
    PiecewiseFlatCurve() : PiecewiseFlatCurve({0.0}, {0.0}) {}

    PiecewiseFlatCurve(std::vector<double> breakpoints, std::vector<double> values)
        : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
        using detail::require;
        require(!breakpoints_.empty(), ErrorKind::parameter, "curves", "curve needs at least one breakpoint");
        require(breakpoints_.size() == values_.size(), ErrorKind::parameter, "curves",
                "curve breakpoints and values differ in length");
        require(breakpoints_.front() >= 0.0 && std::isfinite(breakpoints_.front()), ErrorKind::parameter, "curves",
                "first curve breakpoint must be >= 0");
        for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
            require(std::isfinite(breakpoints_[i]) && breakpoints_[i] > breakpoints_[i - 1], ErrorKind::parameter,
                    "curves", "curve breakpoints must be strictly ascending");
        }
        for (double v : values_) {
            require(std::isfinite(v), ErrorKind::parameter, "curves", "curve values must be finite");
        }
        cumulative_.resize(breakpoints_.size());
        cumulative_[0] = values_[0] * breakpoints_[0];
        for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
            cumulative_[i] = cumulative_[i - 1] + values_[i - 1] * (breakpoints_[i] - breakpoints_[i - 1]);
        }
    }

    static PiecewiseFlatCurve flat(double value) { return PiecewiseFlatCurve({0.0}, {value}); }

    std::span<const double> breakpoints() const noexcept { return breakpoints_; }
    std::span<const double> values() const noexcept { return values_; }

    bool is_nonnegative() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0; });
    }
    bool is_zero() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    }

    double value(double t) const noexcept { return values_[segment(t)]; }

    /// Integral of the curve over [0, t].
    double cumulative(double t) const noexcept {
        if (t <= breakpoints_[0]) return values_[0] * t;
        std::size_t i = segment(t);
        return cumulative_[i] + values_[i] * (t - breakpoints_[i]);
    }

    /// Smallest t >= 0 with cumulative(t) >= target, for nonnegative curves.
    /// Returns +inf when the target is never reached.
    double inverse_cumulative(double target) const noexcept {
        if (target <= 0.0) return 0.0;
        if (target <= cumulative_[0]) return target / values_[0];
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
        // Zero-valued segments have equal cumulative endpoints, so the
        // upper_bound already skips past them.
        if (values_[i] <= 0.0) return std::numeric_limits<double>::infinity();
        return breakpoints_[i] + (target - cumulative_[i]) / values_[i];
    }

private:
    std::size_t segment(double t) const noexcept {
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        if (it == breakpoints_.begin()) return 0;
        return static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
    }

    std::vector<double> breakpoints_;
    std::vector<double> values_;
    std::vector<double> cumulative_;
};

/// Integral of `curve` over [t0, t1].
inline double integrate(const PiecewiseFlatCurve& curve, double t0, double t1) {
    detail::require(t0 >= 0.0, ErrorKind::ordering, "curves", "integration start must be >= 0");
    detail::require(t1 >= t0, ErrorKind::ordering, "curves", "integration interval is reversed (t1 < t0)");
    if (t1 == t0) return 0.0;
    return curve.cumulative(t1) - curve.cumulative(t0);
}

/// exp(-integral of the rate curve over [t0, t1]).
inline double discount_factor(const PiecewiseFlatCurve& curve, double t0, double t1) {
    return std::exp(-integrate(curve, t0, t1));
}

}  // namespace dirac
