#pragma once

// Closed-form bond prices when spike intensity and severity are deterministic.
// Every spike of severity s multiplies survival by e^{-s}; averaging over a
// Poisson count with mean L gives exp((e^{-s} - 1) L).

#include <cmath>
#include <vector>

#include "dirac/curves.hpp"
#include "dirac/error.hpp"

namespace dirac {

/// Spikes arriving with deterministic intensity `zeta`, each carrying hazard
/// mass `severity` (dimensionless integrated hazard, not a rate).
struct FixedSeverityDirac {
    PiecewiseFlatCurve zeta;
    double severity = 0.0;

    void validate() const {
        detail::require(severity >= 0.0, ErrorKind::parameter, "analytic", "severity must be >= 0");
        detail::require(zeta.is_nonnegative(), ErrorKind::parameter, "analytic", "intensity must be >= 0");
    }
};

/// Spikes at known calendar times, e.g. scheduled debt repayments.
struct ScheduledEvents {
    std::vector<double> times;
    std::vector<double> severities;

    void validate() const {
        detail::require(times.size() == severities.size(), ErrorKind::parameter, "analytic",
                        "scheduled event times and severities differ in length");
        for (std::size_t i = 0; i < times.size(); ++i) {
            detail::require(severities[i] >= 0.0, ErrorKind::parameter, "analytic",
                            "scheduled severities must be >= 0");
            detail::require(i == 0 || times[i] > times[i - 1], ErrorKind::parameter, "analytic",
                            "scheduled event times must be ascending");
        }
    }
};

/// Short rate = continuous part + rate spikes + common spikes;
/// hazard = hazard spikes + the same common spikes.
struct MixedShortRateSpec {
    PiecewiseFlatCurve continuous_part;
    FixedSeverityDirac rate_dirac;
    FixedSeverityDirac hazard_dirac;
    PiecewiseFlatCurve common_zeta;
    double common_rate_severity = 0.0;
    double common_hazard_severity = 0.0;

    void validate() const {
        rate_dirac.validate();
        hazard_dirac.validate();
        detail::require(common_zeta.is_nonnegative(), ErrorKind::parameter, "analytic",
                        "common intensity must be >= 0");
        detail::require(common_rate_severity >= 0.0 && common_hazard_severity >= 0.0, ErrorKind::parameter,
                        "analytic", "common severities must be >= 0");
    }
};

namespace detail {

/// log E[exp(-s N)] for N ~ Poisson(L).
inline double spike_log_survival(double severity, double cumulative_intensity) {
    return std::expm1(-severity) * cumulative_intensity;
}

inline void require_ordered(double t, double T) {
    require(t >= 0.0 && T >= t, ErrorKind::ordering, "analytic", "maturity precedes valuation time");
}

}  // namespace detail

inline double semi_defaultable_zcb_fixed(const FixedSeverityDirac& sev, const PiecewiseFlatCurve& discount,
                                         double t, double T1, double T2) {
    detail::require_ordered(t, T1);
    detail::require_ordered(t, T2);
    sev.validate();
    const double lambda = integrate(sev.zeta, t, T2);
    return discount_factor(discount, t, T1) * std::exp(detail::spike_log_survival(sev.severity, lambda));
}

inline double defaultable_zcb_fixed(const FixedSeverityDirac& sev, const PiecewiseFlatCurve& discount, double t,
                                    double T) {
    return semi_defaultable_zcb_fixed(sev, discount, t, T, T);
}

/// Product of e^{-s_j} over scheduled events in (t, T].
inline double scheduled_survival(const ScheduledEvents& events, double t, double T) {
    detail::require_ordered(t, T);
    events.validate();
    double mass = 0.0;
    for (std::size_t i = 0; i < events.times.size(); ++i) {
        if (events.times[i] > t && events.times[i] <= T) mass += events.severities[i];
    }
    return std::exp(-mass);
}

/// Semi-defaultable bond with Dirac components in both the short rate and the
/// hazard rate. Common spikes contribute one independent factor per leg,
/// (e^{-s_a} - 1) L0(t,T1) + (e^{-s_b} - 1) L0(t,T2), so the defaultable case
/// with s_a = s_b = s0 carries 2 (e^{-s0} - 1) L0.
inline double semi_defaultable_zcb_dirac_rates(const MixedShortRateSpec& spec, double t, double T1, double T2) {
    detail::require_ordered(t, T1);
    detail::require_ordered(t, T2);
    spec.validate();
    using detail::spike_log_survival;
    const double exponent =
        spike_log_survival(spec.common_rate_severity, integrate(spec.common_zeta, t, T1)) +
        spike_log_survival(spec.rate_dirac.severity, integrate(spec.rate_dirac.zeta, t, T1)) +
        spike_log_survival(spec.common_hazard_severity, integrate(spec.common_zeta, t, T2)) +
        spike_log_survival(spec.hazard_dirac.severity, integrate(spec.hazard_dirac.zeta, t, T2));
    return discount_factor(spec.continuous_part, t, T1) * std::exp(exponent);
}

inline double defaultable_zcb_dirac_rates(const MixedShortRateSpec& spec, double t, double T) {
    return semi_defaultable_zcb_dirac_rates(spec, t, T, T);
}

/// Same model, but each common spike hits the rate and hazard legs together:
/// on the overlap window both severities act on one Poisson count.
inline double semi_defaultable_zcb_dirac_rates_shared(const MixedShortRateSpec& spec, double t, double T1,
                                                      double T2) {
    detail::require_ordered(t, T1);
    detail::require_ordered(t, T2);
    spec.validate();
    using detail::spike_log_survival;
    const double overlap = std::min(T1, T2);
    const double sa = spec.common_rate_severity;
    const double sb = spec.common_hazard_severity;
    double exponent = spike_log_survival(sa + sb, integrate(spec.common_zeta, t, overlap));
    if (T1 > overlap) exponent += spike_log_survival(sa, integrate(spec.common_zeta, overlap, T1));
    if (T2 > overlap) exponent += spike_log_survival(sb, integrate(spec.common_zeta, overlap, T2));
    exponent += spike_log_survival(spec.rate_dirac.severity, integrate(spec.rate_dirac.zeta, t, T1)) +
                spike_log_survival(spec.hazard_dirac.severity, integrate(spec.hazard_dirac.zeta, t, T2));
    return discount_factor(spec.continuous_part, t, T1) * std::exp(exponent);
}

inline double defaultable_zcb_dirac_rates_shared(const MixedShortRateSpec& spec, double t, double T) {
    return semi_defaultable_zcb_dirac_rates_shared(spec, t, T, T);
}

/// Spike intensity that reproduces a flat hazard rate `lambda` when every
/// spike carries severity `severity`: nu = lambda / (1 - e^{-s}).
inline double tradeoff_intensity(double lambda, double severity) {
    detail::require(lambda >= 0.0, ErrorKind::parameter, "analytic", "hazard rate must be >= 0");
    detail::require(severity >= 0.0, ErrorKind::parameter, "analytic", "severity must be >= 0");
    if (severity == 0.0) {
        detail::fail(ErrorKind::singularity, "analytic", "zero severity needs infinite intensity");
    }
    return lambda / -std::expm1(-severity);
}

}  // namespace dirac
