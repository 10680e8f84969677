#pragma once

// Dirac-OU-Severity state-space engine.
//
// The severity driver x follows an Ornstein-Uhlenbeck process in event time:
// one unit (t_step) of driver time elapses per spike, and calendar time only
// enters through the Poisson count of spikes. Discretizing x on a grid gives a
// constant transition matrix A per spike, a diagonal severity matrix S and an
// initial row vector h, so that
//
//     survival = h * sum_i P{N = i} (A (I - S))^i * 1.
//
// Sums are evaluated with iterated matrix-vector products, never explicit
// matrix powers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dirac/curves.hpp"
#include "dirac/error.hpp"

namespace dirac {

inline constexpr double kDefaultTailTol = 1e-12;

struct OUParams {
    double theta = 0.0;   // mean reversion per event step
    double mu = 0.0;      // long-run driver level
    double sigma = 0.0;   // volatility per sqrt(event step)
    double x0 = 0.0;
    double t_step = 1.0;  // driver time per spike

    void validate() const {
        using detail::require;
        require(theta >= 0.0, ErrorKind::parameter, "ou_state", "theta must be >= 0");
        require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::parameter, "ou_state", "sigma must be >= 0");
        require(t_step > 0.0 && std::isfinite(t_step), ErrorKind::parameter, "ou_state", "t_step must be > 0");
        require(std::isfinite(mu) && std::isfinite(x0), ErrorKind::parameter, "ou_state",
                "mu and x0 must be finite");
    }
};

struct OUMoments {
    double mean;
    double variance;
};

/// Conditional mean and variance of the driver after driver time `t`,
/// starting from `x`. theta = 0 uses the Brownian limit.
inline OUMoments ou_moments(double theta, double mu, double sigma, double x, double t) {
    detail::require(t >= 0.0, ErrorKind::parameter, "ou_state", "driver time must be >= 0");
    if (theta == 0.0) return {x, sigma * sigma * t};
    if (std::isinf(theta)) return {mu, 0.0};
    const double decay = -std::expm1(-theta * t);  // 1 - e^{-theta t}
    const double mean = x + (mu - x) * decay;
    const double variance = sigma * sigma * (-std::expm1(-2.0 * theta * t)) / (2.0 * theta);
    return {mean, variance};
}

inline OUMoments ou_moments(const OUParams& p, double t) { return ou_moments(p.theta, p.mu, p.sigma, p.x0, t); }

/// tanh squeeze of the driver into the severity band [1 - 1/b, 1].
struct BandTransform {
    double b = 1.0;

    void validate() const {
        detail::require(b >= 1.0 && std::isfinite(b), ErrorKind::parameter, "ou_state", "band b must be >= 1");
    }

    double severity(double x) const noexcept { return (std::tanh(x) + 1.0) / (2.0 * b) + (b - 1.0) / b; }

    /// 1 - severity(x), evaluated without cancellation.
    double complement(double x) const noexcept {
        if (x > 0.0) {
            const double e = std::exp(-2.0 * x);
            return e / (b * (1.0 + e));
        }
        return 1.0 / (b * (1.0 + std::exp(2.0 * x)));
    }
};

inline double band_transform(double x, const BandTransform& band) {
    band.validate();
    return band.severity(x);
}

/// How a spike of severity s reduces survival.
enum class SurvivalConvention {
    exp_severity,        // factor e^{-s}
    one_minus_severity,  // factor 1 - s, i.e. default with probability s
};

inline double survival_factor(double severity, SurvivalConvention convention) {
    if (convention == SurvivalConvention::exp_severity) return std::exp(-severity);
    detail::require(severity >= 0.0 && severity <= 1.0, ErrorKind::convention, "ou_state",
                    "one-minus-severity convention needs severity in [0,1]");
    return 1.0 - severity;
}

/// P{N(L) = i} for i = 0..N_max, N_max minimal with remaining tail < tail_tol.
inline std::vector<double> poisson_weights(double cumulative_intensity, double tail_tol = kDefaultTailTol) {
    const double lambda = cumulative_intensity;
    detail::require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::parameter, "ou_state",
                    "cumulative intensity must be finite and >= 0");
    detail::require(tail_tol > 0.0 && tail_tol < 1.0, ErrorKind::parameter, "ou_state",
                    "tail tolerance must be in (0,1)");
    if (lambda == 0.0) return {1.0};

    std::vector<double> w;
    const bool use_recurrence = lambda < 700.0;
    const double log_lambda = std::log(lambda);
    const double cutoff = tail_tol * 1e-6;
    for (std::size_t i = 0;; ++i) {
        double wi;
        if (use_recurrence) {
            wi = i == 0 ? std::exp(-lambda) : w.back() * lambda / static_cast<double>(i);
        } else {
            wi = std::exp(-lambda + static_cast<double>(i) * log_lambda - std::lgamma(static_cast<double>(i) + 1.0));
        }
        w.push_back(wi);
        if (static_cast<double>(i) > lambda && wi < cutoff) break;
    }
    // tail[n] = sum_{i>n} w_i, accumulated from the far end.
    double tail = 0.0;
    std::size_t n_max = w.size() - 1;
    for (std::size_t n = w.size() - 1; n-- > 0;) {
        tail += w[n + 1];
        if (tail >= tail_tol) break;
        n_max = n;
    }
    w.resize(n_max + 1);
    return w;
}

inline int max_events_for(double cumulative_intensity, double tail_tol = kDefaultTailTol) {
    return static_cast<int>(poisson_weights(cumulative_intensity, tail_tol).size()) - 1;
}

/// Grid controls. Uniform nodes cover x0 and mu plus `half_width` standard
/// deviations of the driver after `max_events` spikes (and, with a volatility
/// switch, `max_events_after` further spikes at the second volatility). The
/// grid is shifted so that x0 is a node.
struct GridSpec {
    int n_nodes = 201;
    double half_width = 6.0;
    int max_events = 0;
    int max_events_after = 0;
    bool variance_correction = true;
};

/// Piecewise-flat volatility term structure: `sigma_after` applies to spikes
/// after calendar time `switch_time`.
struct VolSwitch {
    double sigma_after = 0.0;
    double switch_time = 0.0;
};

enum class Regime { before_switch, after_switch };

struct StateEngine {
    std::vector<double> nodes;
    Eigen::MatrixXd transition;                       // A
    std::optional<Eigen::MatrixXd> transition_after;  // A2, spikes after the switch
    std::optional<double> switch_time;
    Eigen::VectorXd severity;   // diagonal of S
    Eigen::VectorXd survival;   // per-spike survival in each state
    Eigen::RowVectorXd initial; // h
    OUParams params;
    BandTransform band;
    SurvivalConvention convention = SurvivalConvention::one_minus_severity;
    double sigma_after = 0.0;

    std::size_t size() const noexcept { return nodes.size(); }

    const Eigen::MatrixXd& transition_for(Regime regime) const {
        if (regime == Regime::after_switch && transition_after) return *transition_after;
        return transition;
    }
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Phi(hi) - Phi(lo) without losing the upper tail.
inline double normal_mass(double lo, double hi) {
    if (lo >= hi) return 0.0;
    if (lo > 0.0) return normal_cdf(-lo) - normal_cdf(-hi);
    return normal_cdf(hi) - normal_cdf(lo);
}

/// Probability that N(mean, sd^2) lands in each midpoint cell of `nodes`.
/// The outer cells extend to +-inf. Renormalized to sum to one.
inline void gaussian_cell_masses(std::span<const double> nodes, double mean, double sd, Eigen::RowVectorXd& row) {
    const std::size_t n = nodes.size();
    row.setZero();
    if (n == 1) {
        row(0) = 1.0;
        return;
    }
    if (sd <= 0.0) {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), mean);
        std::size_t j = static_cast<std::size_t>(it - nodes.begin());
        if (j == n) j = n - 1;
        else if (j > 0 && mean - nodes[j - 1] <= nodes[j] - mean) j -= 1;
        row(static_cast<Eigen::Index>(j)) = 1.0;
        return;
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    double lo = -inf;
    for (std::size_t j = 0; j < n; ++j) {
        const double hi = j + 1 < n ? 0.5 * (nodes[j] + nodes[j + 1]) : inf;
        row(static_cast<Eigen::Index>(j)) = normal_mass((lo - mean) / sd, (hi - mean) / sd);
        lo = hi;
    }
    const double total = row.sum();
    row /= total;
}

/// Row i holds the cell masses of the one-step OU transition from node i.
/// With `variance_correction`, h^2/12 is taken off the transition variance
/// (Sheppard's correction) to cancel the spread added by snapping to cells.
inline Eigen::MatrixXd ou_transition_matrix(std::span<const double> nodes, const OUParams& p, double sigma,
                                            bool variance_correction) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    const double step = nodes.size() > 1 ? nodes[1] - nodes[0] : 0.0;
    const double snap_variance = variance_correction ? step * step / 12.0 : 0.0;
    Eigen::MatrixXd a(n, n);
    Eigen::RowVectorXd row(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const OUMoments m = ou_moments(p.theta, p.mu, sigma, nodes[static_cast<std::size_t>(i)], p.t_step);
        gaussian_cell_masses(nodes, m.mean, std::sqrt(std::max(m.variance - snap_variance, 0.0)), row);
        a.row(i) = row;
    }
    return a;
}

}  // namespace detail

/// Bracketing node index and the weight on the lower node for linear
/// interpolation at x; clamps outside the grid.
struct NodeBracket {
    std::size_t lower;
    double lower_weight;
};

inline NodeBracket bracket(std::span<const double> nodes, double x) noexcept {
    const std::size_t n = nodes.size();
    if (n == 1 || x <= nodes.front()) return {0, 1.0};
    if (x >= nodes.back()) return {n - 2, 0.0};
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t j = static_cast<std::size_t>(it - nodes.begin()) - 1;
    const double w = (nodes[j + 1] - x) / (nodes[j + 1] - nodes[j]);
    return {j, w};
}

/// Linear interpolation of per-node values at x.
inline double interpolate_on_nodes(std::span<const double> nodes, const Eigen::VectorXd& values, double x) {
    const NodeBracket br = bracket(nodes, x);
    if (nodes.size() == 1) return values(0);
    const auto j = static_cast<Eigen::Index>(br.lower);
    return br.lower_weight * values(j) + (1.0 - br.lower_weight) * values(j + 1);
}

inline StateEngine build_engine(const OUParams& params, const BandTransform& band, const GridSpec& grid,
                                SurvivalConvention convention = SurvivalConvention::one_minus_severity,
                                std::optional<VolSwitch> vol_switch = std::nullopt) {
    params.validate();
    band.validate();
    detail::require(grid.n_nodes >= 1, ErrorKind::parameter, "ou_state", "grid needs at least one node");
    detail::require(grid.half_width > 0.0, ErrorKind::parameter, "ou_state", "grid half width must be > 0");
    detail::require(grid.max_events >= 0 && grid.max_events_after >= 0, ErrorKind::parameter, "ou_state",
                    "grid event counts must be >= 0");
    if (vol_switch) {
        detail::require(vol_switch->sigma_after >= 0.0, ErrorKind::parameter, "ou_state",
                        "second volatility must be >= 0");
        detail::require(vol_switch->switch_time >= 0.0, ErrorKind::parameter, "ou_state",
                        "volatility switch time must be >= 0");
    }

    StateEngine e;
    e.params = params;
    e.band = band;
    e.convention = convention;
    const auto n = static_cast<std::size_t>(grid.n_nodes);

    if (n == 1) {
        e.nodes = {params.x0};
    } else {
        double variance = ou_moments(params.theta, params.mu, params.sigma, params.x0,
                                     params.t_step * std::max(grid.max_events, 1))
                              .variance;
        if (vol_switch) {
            variance += ou_moments(params.theta, params.mu, vol_switch->sigma_after, params.x0,
                                   params.t_step * std::max(grid.max_events_after, 1))
                            .variance;
        }
        const double spread = grid.half_width * std::sqrt(variance);
        double lo = std::min(params.x0, params.mu) - spread;
        double hi = std::max(params.x0, params.mu) + spread;
        if (hi - lo <= 0.0) {
            lo -= 1.0;
            hi += 1.0;
        }
        // Shift by less than half a step so that x0 sits exactly on a node.
        const double step = (hi - lo) / static_cast<double>(n - 1);
        lo = params.x0 - std::round((params.x0 - lo) / step) * step;
        e.nodes.resize(n);
        for (std::size_t j = 0; j < n; ++j) e.nodes[j] = lo + step * static_cast<double>(j);
    }

    e.transition = detail::ou_transition_matrix(e.nodes, params, params.sigma, grid.variance_correction);
    if (vol_switch) {
        e.transition_after =
            detail::ou_transition_matrix(e.nodes, params, vol_switch->sigma_after, grid.variance_correction);
        e.switch_time = vol_switch->switch_time;
        e.sigma_after = vol_switch->sigma_after;
    }

    const auto en = static_cast<Eigen::Index>(n);
    e.severity.resize(en);
    e.survival.resize(en);
    for (Eigen::Index j = 0; j < en; ++j) {
        const double x = e.nodes[static_cast<std::size_t>(j)];
        e.severity(j) = band.severity(x);
        e.survival(j) = convention == SurvivalConvention::one_minus_severity ? band.complement(x)
                                                                             : std::exp(-e.severity(j));
    }

    e.initial = Eigen::RowVectorXd::Zero(en);
    const NodeBracket br = bracket(e.nodes, params.x0);
    if (n == 1) {
        e.initial(0) = 1.0;
    } else {
        e.initial(static_cast<Eigen::Index>(br.lower)) = br.lower_weight;
        e.initial(static_cast<Eigen::Index>(br.lower) + 1) = 1.0 - br.lower_weight;
    }
    return e;
}

/// sum_i w_i (A D)^i p, with D = diag(survival).
inline Eigen::VectorXd poisson_sum(const Eigen::MatrixXd& transition, const Eigen::VectorXd& survival,
                                   std::span<const double> weights, const Eigen::VectorXd& payoff) {
    detail::require(transition.rows() == payoff.size() && transition.cols() == payoff.size() &&
                        survival.size() == payoff.size(),
                    ErrorKind::dimension, "ou_state", "engine and payoff dimensions differ");
    Eigen::VectorXd v = payoff;
    Eigen::VectorXd acc = weights[0] * v;
    for (std::size_t i = 1; i < weights.size(); ++i) {
        v = transition * survival.cwiseProduct(v);
        acc += weights[i] * v;
    }
    return acc;
}

/// h sum_i w_i (A D)^i as a row vector: the state-price density at the end of
/// the window including survival of every spike on the way.
inline Eigen::RowVectorXd poisson_sum_row(const Eigen::RowVectorXd& initial, const Eigen::MatrixXd& transition,
                                          const Eigen::VectorXd& survival, std::span<const double> weights) {
    detail::require(transition.rows() == initial.size() && survival.size() == initial.size(),
                    ErrorKind::dimension, "ou_state", "engine and row vector dimensions differ");
    Eigen::RowVectorXd r = initial;
    Eigen::RowVectorXd acc = weights[0] * r;
    for (std::size_t i = 1; i < weights.size(); ++i) {
        r = (r * transition).cwiseProduct(survival.transpose());
        acc += weights[i] * r;
    }
    return acc;
}

/// State-conditional survival over a window with cumulative intensity `lambda`
/// using the transition matrix of `regime`.
inline Eigen::VectorXd conditional_survival_vector(const StateEngine& engine, double lambda,
                                                   Regime regime = Regime::before_switch,
                                                   double tail_tol = kDefaultTailTol) {
    const auto w = poisson_weights(lambda, tail_tol);
    return poisson_sum(engine.transition_for(regime), engine.survival, w,
                       Eigen::VectorXd::Ones(static_cast<Eigen::Index>(engine.size())));
}

/// sum_i w_i (A D)^i 1 over one window.
inline Eigen::VectorXd survival_operator(const StateEngine& engine, double lambda,
                                         double tail_tol = kDefaultTailTol) {
    return conditional_survival_vector(engine, lambda, Regime::before_switch, tail_tol);
}

/// Cumulative intensities of two consecutive windows with independent spike
/// counts: the first uses A, the second A2.
struct EventSplit {
    double before = 0.0;
    double after = 0.0;
};

inline Eigen::VectorXd survival_operator(const StateEngine& engine, const EventSplit& split,
                                         double tail_tol = kDefaultTailTol) {
    const double lambda_before = split.before;
    const double lambda_after = split.after;
    detail::require(engine.transition_after.has_value(), ErrorKind::parameter, "ou_state",
                    "split survival needs an engine with a volatility switch");
    const Eigen::VectorXd later = conditional_survival_vector(engine, lambda_after, Regime::after_switch, tail_tol);
    const auto w = poisson_weights(lambda_before, tail_tol);
    return poisson_sum(engine.transition, engine.survival, w, later);
}

/// Cumulative intensity of [t, T] split at the engine's switch time.
inline EventSplit split_intensity(const StateEngine& engine, const PiecewiseFlatCurve& zeta, double t, double T) {
    if (!engine.transition_after || !engine.switch_time) return {integrate(zeta, t, T), 0.0};
    const double tau = std::clamp(*engine.switch_time, t, T);
    return {integrate(zeta, t, tau), integrate(zeta, tau, T)};
}

inline double semi_defaultable_zcb_ou(const StateEngine& engine, const PiecewiseFlatCurve& discount,
                                      const PiecewiseFlatCurve& zeta, double t, double T1, double T2,
                                      double tail_tol = kDefaultTailTol) {
    detail::require(t >= 0.0 && T1 >= t && T2 >= t, ErrorKind::ordering, "ou_state",
                    "maturity precedes valuation time");
    detail::require(zeta.is_nonnegative(), ErrorKind::parameter, "ou_state", "intensity must be >= 0");
    const EventSplit split = split_intensity(engine, zeta, t, T2);
    const Eigen::VectorXd v = engine.transition_after ? survival_operator(engine, split, tail_tol)
                                                      : survival_operator(engine, split.before, tail_tol);
    return discount_factor(discount, t, T1) * engine.initial.dot(v);
}

inline double defaultable_zcb_ou(const StateEngine& engine, const PiecewiseFlatCurve& discount,
                                 const PiecewiseFlatCurve& zeta, double t, double T,
                                 double tail_tol = kDefaultTailTol) {
    return semi_defaultable_zcb_ou(engine, discount, zeta, t, T, T, tail_tol);
}

/// Precomputed u_k = (A D)^k 1 for k <= N_max(lambda_max), so that survival
/// vectors for many windows inside [0, lambda_max] cost one weighted sum each.
class SurvivalBasis {
public:
    SurvivalBasis(const StateEngine& engine, Regime regime, double lambda_max, double tail_tol = kDefaultTailTol)
        : tail_tol_(tail_tol) {
        const int n_max = max_events_for(lambda_max, tail_tol);
        const auto n = static_cast<Eigen::Index>(engine.size());
        const Eigen::MatrixXd& a = engine.transition_for(regime);
        basis_.resize(n, n_max + 1);
        basis_.col(0).setOnes();
        for (int k = 1; k <= n_max; ++k) {
            basis_.col(k) = a * engine.survival.cwiseProduct(basis_.col(k - 1));
        }
    }

    Eigen::Index max_events() const noexcept { return basis_.cols() - 1; }
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }

    /// Poisson weights padded or truncated to the basis length.
    Eigen::VectorXd weights(double lambda) const {
        const auto w = poisson_weights(lambda, tail_tol_);
        detail::require(static_cast<Eigen::Index>(w.size()) <= basis_.cols(), ErrorKind::parameter, "ou_state",
                        "window exceeds the precomputed survival basis");
        Eigen::VectorXd out = Eigen::VectorXd::Zero(basis_.cols());
        for (std::size_t i = 0; i < w.size(); ++i) out(static_cast<Eigen::Index>(i)) = w[i];
        return out;
    }

    Eigen::VectorXd vector(double lambda) const { return basis_ * weights(lambda); }

private:
    double tail_tol_;
    Eigen::MatrixXd basis_;
};

}  // namespace dirac
