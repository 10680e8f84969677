#pragma once

// Monte Carlo simulation of Dirac processes: the independent oracle for the
// closed forms and the state-space engine. Paths are simulated in continuous
// calendar time with a continuous OU severity driver; nothing here uses the
// state grid except the conditional forward-leg values of the swaption.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <variant>
#include <vector>

#include "dirac/analytic.hpp"
#include "dirac/curves.hpp"
#include "dirac/error.hpp"
#include "dirac/instruments.hpp"
#include "dirac/ou_state.hpp"
#include "dirac/rng.hpp"

namespace dirac {

struct EventPath {
    std::vector<double> event_times;
    std::vector<double> severities;
    double horizon = 0.0;
};

struct MCResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;

    double z_score(double reference) const {
        if (std_error == 0.0) return estimate == reference ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), estimate - reference);
        return (estimate - reference) / std_error;
    }
};

struct McOptions {
    std::size_t n_paths = 100000;
    std::uint64_t seed = 42;
    unsigned threads = 1;  // 0 = hardware concurrency
};

/// Unit-severity spikes with i.i.d. Exponential(nu) gaps on [0, horizon].
inline EventPath sample_homogeneous_events(double nu, double horizon, PathRng& rng) {
    detail::require(nu >= 0.0 && std::isfinite(nu), ErrorKind::parameter, "dirac_sim", "intensity must be >= 0");
    detail::require(horizon > 0.0, ErrorKind::parameter, "dirac_sim", "horizon must be > 0");
    EventPath path;
    path.horizon = horizon;
    if (nu == 0.0) return path;
    double t = 0.0;
    for (;;) {
        t += rng.exponential() / nu;
        if (t > horizon) break;
        path.event_times.push_back(t);
    }
    path.severities.assign(path.event_times.size(), 1.0);
    return path;
}

/// Inhomogeneous spikes by inverting the cumulative intensity of unit-rate
/// arrivals.
inline EventPath sample_inhomogeneous_events(const PiecewiseFlatCurve& zeta, double horizon, PathRng& rng) {
    detail::require(zeta.is_nonnegative(), ErrorKind::parameter, "dirac_sim", "intensity must be >= 0");
    detail::require(horizon > 0.0, ErrorKind::parameter, "dirac_sim", "horizon must be > 0");
    EventPath path;
    path.horizon = horizon;
    const double total = zeta.cumulative(horizon);
    if (total <= 0.0) return path;
    double arrival = 0.0;
    for (;;) {
        arrival += rng.exponential();
        if (arrival > total) break;
        path.event_times.push_back(std::min(zeta.inverse_cumulative(arrival), horizon));
    }
    path.severities.assign(path.event_times.size(), 1.0);
    return path;
}

/// Product of per-spike survival factors for events with t0 < E_i <= t1.
inline double integrated_survival(const EventPath& path, double t0, double t1, SurvivalConvention convention) {
    detail::require(t1 >= t0, ErrorKind::ordering, "dirac_sim", "survival window is reversed");
    double s = 1.0;
    for (std::size_t i = 0; i < path.event_times.size(); ++i) {
        const double t = path.event_times[i];
        if (t > t0 && t <= t1) s *= survival_factor(path.severities[i], convention);
    }
    return s;
}

namespace detail {

/// Welford accumulator; merged in chunk order so results do not depend on
/// the number of workers.
struct Moments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        count += 1.0;
        const double d = x - mean;
        mean += d / count;
        m2 += d * (x - mean);
    }

    void merge(const Moments& o) noexcept {
        if (o.count == 0.0) return;
        if (count == 0.0) {
            *this = o;
            return;
        }
        const double n = count + o.count;
        const double d = o.mean - mean;
        mean += d * o.count / n;
        m2 += o.m2 + d * d * count * o.count / n;
        count = n;
    }
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

}  // namespace detail

/// Runs `fn(path_index, rng, outputs)` for every path and returns one MCResult
/// per output slot. Bit-identical for any thread count.
template <class PathFn>
std::vector<MCResult> run_monte_carlo(const McOptions& opts, std::size_t n_outputs, PathFn&& fn) {
    detail::require(opts.n_paths >= 2, ErrorKind::parameter, "dirac_sim", "need at least two paths");
    constexpr std::size_t chunk = 4096;
    const std::size_t n_chunks = (opts.n_paths + chunk - 1) / chunk;
    std::vector<std::vector<detail::Moments>> per_chunk(n_chunks, std::vector<detail::Moments>(n_outputs));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};

    auto worker = [&] {
        std::vector<double> out(n_outputs);
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            const std::size_t end = std::min(opts.n_paths, (c + 1) * chunk);
            try {
                for (std::size_t p = c * chunk; p < end; ++p) {
                    PathRng rng(opts.seed, p);
                    std::fill(out.begin(), out.end(), 0.0);
                    fn(static_cast<std::uint64_t>(p), rng, std::span<double>(out));
                    for (std::size_t k = 0; k < n_outputs; ++k) per_chunk[c][k].add(out[k]);
                }
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };

    const unsigned n_threads = std::min<unsigned>(detail::resolve_threads(opts.threads),
                                                  static_cast<unsigned>(std::max<std::size_t>(n_chunks, 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<MCResult> results(n_outputs);
    for (std::size_t k = 0; k < n_outputs; ++k) {
        detail::Moments total;
        for (const auto& c : per_chunk) total.merge(c[k]);
        const double var = total.count > 1.0 ? total.m2 / (total.count - 1.0) : 0.0;
        results[k] = {total.mean, std::sqrt(std::max(var, 0.0) / total.count), opts.n_paths, opts.seed};
    }
    return results;
}

/// Severity driven by a tanh-banded OU process evolving one t_step per spike.
struct OuSeverityHazard {
    OUParams ou;
    BandTransform band;
    PiecewiseFlatCurve zeta;
    std::optional<VolSwitch> vol_switch;

    void validate() const {
        ou.validate();
        band.validate();
        detail::require(zeta.is_nonnegative(), ErrorKind::parameter, "dirac_sim", "intensity must be >= 0");
    }

    double sigma_at(double t) const noexcept {
        return vol_switch && t > vol_switch->switch_time ? vol_switch->sigma_after : ou.sigma;
    }
};

using HazardSpec = std::variant<FixedSeverityDirac, OuSeverityHazard>;

namespace detail {

/// One exact OU step of length t_step from x.
inline double ou_step(const OUParams& p, double sigma, double x, PathRng& rng) {
    const OUMoments m = ou_moments(p.theta, p.mu, sigma, x, p.t_step);
    return m.mean + std::sqrt(m.variance) * rng.normal();
}

inline const PiecewiseFlatCurve& hazard_zeta(const HazardSpec& spec) {
    return std::visit([](const auto& s) -> const PiecewiseFlatCurve& { return s.zeta; }, spec);
}

}  // namespace detail

/// Spike times on [0, horizon] with their realized severities.
inline EventPath simulate_hazard_path(const HazardSpec& spec, double horizon, PathRng& rng) {
    EventPath path = sample_inhomogeneous_events(detail::hazard_zeta(spec), horizon, rng);
    if (const auto* fixed = std::get_if<FixedSeverityDirac>(&spec)) {
        std::fill(path.severities.begin(), path.severities.end(), fixed->severity);
        return path;
    }
    const auto& ou = std::get<OuSeverityHazard>(spec);
    double x = ou.ou.x0;
    for (std::size_t i = 0; i < path.event_times.size(); ++i) {
        x = detail::ou_step(ou.ou, ou.sigma_at(path.event_times[i]), x, rng);
        path.severities[i] = ou.band.severity(x);
    }
    return path;
}

enum class McEstimator {
    pathwise,           // simulate spike times, average the realized survival
    poisson_conditional // average over the OU driver path, sum over spike counts exactly
};

/// P(0, T1, T2) by simulation: DF(0,T1) times the mean survival over (0, T2].
inline MCResult mc_semi_defaultable_zcb(const HazardSpec& hazard, const PiecewiseFlatCurve& discount, double T1,
                                        double T2, const McOptions& opts, SurvivalConvention convention,
                                        McEstimator estimator = McEstimator::pathwise) {
    detail::require(T1 >= 0.0 && T2 >= 0.0, ErrorKind::ordering, "dirac_sim", "maturities must be >= 0");
    std::visit([](const auto& s) { s.validate(); }, hazard);
    std::vector<MCResult> r;

    if (estimator == McEstimator::pathwise) {
        r = run_monte_carlo(opts, 1, [&](std::uint64_t, PathRng& rng, std::span<double> out) {
            if (T2 <= 0.0) {
                out[0] = 1.0;
                return;
            }
            const EventPath path = simulate_hazard_path(hazard, T2, rng);
            out[0] = integrated_survival(path, 0.0, T2, convention);
        });
    } else {
        const auto w = poisson_weights(integrate(detail::hazard_zeta(hazard), 0.0, T2));
        const auto* ou = std::get_if<OuSeverityHazard>(&hazard);
        detail::require(ou == nullptr || !ou->vol_switch, ErrorKind::unsupported, "dirac_sim",
                        "count-conditional estimator needs a single driver volatility");
        r = run_monte_carlo(opts, 1, [&](std::uint64_t, PathRng& rng, std::span<double> out) {
            double survival = 1.0;
            double acc = w[0];
            double x = ou ? ou->ou.x0 : 0.0;
            for (std::size_t n = 1; n < w.size(); ++n) {
                double severity;
                if (ou) {
                    x = detail::ou_step(ou->ou, ou->ou.sigma, x, rng);
                    severity = ou->band.severity(x);
                } else {
                    severity = std::get<FixedSeverityDirac>(hazard).severity;
                }
                survival *= survival_factor(severity, convention);
                acc += w[n] * survival;
            }
            out[0] = acc;
        });
    }
    const double df = discount_factor(discount, 0.0, T1);
    r[0].estimate *= df;
    r[0].std_error *= df;
    return r[0];
}

inline MCResult mc_defaultable_zcb(const HazardSpec& hazard, const PiecewiseFlatCurve& discount, double T,
                                   const McOptions& opts, SurvivalConvention convention,
                                   McEstimator estimator = McEstimator::pathwise) {
    return mc_semi_defaultable_zcb(hazard, discount, T, T, opts, convention, estimator);
}

enum class CommonSpikes {
    independent_per_leg,  // each leg sees its own copy of the common process
    shared,               // one common process hits both legs at the same instants
};

/// Mixed continuous + Dirac short rate with Dirac hazard (exp-severity).
inline MCResult mc_mixed_zcb(const MixedShortRateSpec& spec, double T1, double T2, const McOptions& opts,
                             CommonSpikes common) {
    spec.validate();
    auto count = [](const PiecewiseFlatCurve& zeta, double horizon, PathRng& rng) -> double {
        if (horizon <= 0.0) return 0.0;
        return static_cast<double>(sample_inhomogeneous_events(zeta, horizon, rng).event_times.size());
    };
    auto r = run_monte_carlo(opts, 1, [&](std::uint64_t, PathRng& rng, std::span<double> out) {
        const double n1 = count(spec.rate_dirac.zeta, T1, rng);
        const double n2 = count(spec.hazard_dirac.zeta, T2, rng);
        double rate_common, hazard_common;
        if (common == CommonSpikes::shared) {
            const double horizon = std::max(T1, T2);
            const EventPath p = horizon > 0.0 ? sample_inhomogeneous_events(spec.common_zeta, horizon, rng)
                                              : EventPath{};
            rate_common = static_cast<double>(
                std::count_if(p.event_times.begin(), p.event_times.end(), [&](double t) { return t <= T1; }));
            hazard_common = static_cast<double>(
                std::count_if(p.event_times.begin(), p.event_times.end(), [&](double t) { return t <= T2; }));
        } else {
            rate_common = count(spec.common_zeta, T1, rng);
            hazard_common = count(spec.common_zeta, T2, rng);
        }
        out[0] = std::exp(-(spec.rate_dirac.severity * n1 + spec.common_rate_severity * rate_common +
                            spec.hazard_dirac.severity * n2 + spec.common_hazard_severity * hazard_common));
    });
    const double df = discount_factor(spec.continuous_part, 0.0, T1);
    r[0].estimate *= df;
    r[0].std_error *= df;
    return r[0];
}

enum class KnockOut {
    bernoulli,         // default drawn per spike with probability 1 - survival factor
    survival_weighted, // payoff weighted by the product of survival factors
};

/// Payer CDS swaption by simulation. Spikes and the continuous OU driver are
/// simulated to expiry; surviving paths value the forward CDS legs from the
/// realized driver level by interpolating the engine's per-state legs.
inline std::vector<MCResult> mc_cds_swaption(const StateEngine& engine, const CDSContract& contract,
                                             double expiry, const PiecewiseFlatCurve& discount,
                                             const PiecewiseFlatCurve& zeta, std::span<const double> strikes,
                                             const McOptions& opts, KnockOut knock_out = KnockOut::bernoulli,
                                             double tail_tol = kDefaultTailTol) {
    detail::require(expiry > 0.0, ErrorKind::ordering, "dirac_sim", "swaption expiry must be > 0");
    if (expiry > contract.start() + 1e-12) {
        detail::fail(ErrorKind::unsupported, "dirac_sim", "swaption into a seasoned CDS (expiry after start)");
    }
    const ForwardCdsLegs legs = forward_cds_legs(engine, contract, expiry, discount, zeta, tail_tol);
    const OUParams& ou = engine.params;
    const BandTransform band = engine.band;
    const bool one_minus = engine.convention == SurvivalConvention::one_minus_severity;
    std::vector<double> k(strikes.begin(), strikes.end());

    auto r = run_monte_carlo(opts, k.size(), [&](std::uint64_t, PathRng& rng, std::span<double> out) {
        const EventPath path = sample_inhomogeneous_events(zeta, expiry, rng);
        double x = ou.x0;
        double weight = 1.0;
        for (std::size_t i = 0; i < path.event_times.size(); ++i) {
            x = detail::ou_step(ou, ou.sigma, x, rng);
            const double survive = one_minus ? band.complement(x) : std::exp(-band.severity(x));
            if (knock_out == KnockOut::bernoulli) {
                if (rng.uniform() >= survive) return;  // defaulted before expiry
            } else {
                weight *= survive;
            }
        }
        const double prot = interpolate_on_nodes(engine.nodes, legs.protection, x);
        const double ann = interpolate_on_nodes(engine.nodes, legs.annuity, x);
        for (std::size_t j = 0; j < k.size(); ++j) out[j] = weight * std::max(prot - k[j] * ann, 0.0);
    });
    const double df = discount_factor(discount, 0.0, expiry);
    for (auto& m : r) {
        m.estimate *= df;
        m.std_error *= df;
    }
    return r;
}

}  // namespace dirac
