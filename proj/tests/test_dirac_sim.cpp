#include <cmath>
#include <cstring>

#include <gtest/gtest.h>

#include "dirac/dirac_sim.hpp"
#include "poisson_gof.hpp"

using namespace dirac;

namespace {

const PiecewiseFlatCurve r2 = PiecewiseFlatCurve::flat(0.02);

template <class Sampler>
std::vector<std::size_t> event_counts(std::size_t n, std::uint64_t seed, Sampler&& sample) {
    std::vector<std::size_t> counts(n);
    for (std::size_t p = 0; p < n; ++p) {
        PathRng rng(seed, p);
        counts[p] = sample(rng).event_times.size();
    }
    return counts;
}

void expect_mean_and_variance(const std::vector<std::size_t>& counts, double lambda) {
    const double n = static_cast<double>(counts.size());
    double mean = 0.0, m2 = 0.0;
    for (auto c : counts) mean += static_cast<double>(c);
    mean /= n;
    for (auto c : counts) m2 += (c - mean) * (c - mean);
    const double var = m2 / (n - 1);
    EXPECT_LT(std::abs(mean - lambda), 3.0 * std::sqrt(lambda / n));
    // Poisson fourth central moment is lambda (1 + 3 lambda).
    EXPECT_LT(std::abs(var - lambda), 3.0 * std::sqrt((lambda + 2 * lambda * lambda) / n));
}

}  // namespace

TEST(Philox, KnownAnswer) {
    const auto out = PathRng::philox({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (PathRng::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    const auto ones = PathRng::philox({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(ones, (PathRng::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    const auto pi = PathRng::philox({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(pi, (PathRng::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(PathRng, StreamsAreDeterministicAndDistinct) {
    PathRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        EXPECT_NE(x, c.next_u64());
        EXPECT_NE(x, d.next_u64());
    }
    PathRng u(1, 1);
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double v = u.uniform();
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
        mean += v;
    }
    EXPECT_NEAR(mean / 100000, 0.5, 3 * std::sqrt(1.0 / 12 / 100000));
}

TEST(Sampling, ZeroIntensity) {
    PathRng rng(1, 0);
    EXPECT_TRUE(sample_homogeneous_events(0.0, 5.0, rng).event_times.empty());
    EXPECT_TRUE(sample_inhomogeneous_events(PiecewiseFlatCurve::flat(0.0), 5.0, rng).event_times.empty());
    EXPECT_THROW(sample_homogeneous_events(-1.0, 5.0, rng), Error);
    EXPECT_THROW(sample_homogeneous_events(1.0, 0.0, rng), Error);
    EXPECT_THROW(sample_inhomogeneous_events(PiecewiseFlatCurve({0, 1}, {1, -1}), 5.0, rng), Error);
}

TEST(Sampling, PathInvariants) {
    PathRng rng(3, 0);
    for (int i = 0; i < 1000; ++i) {
        const EventPath p = sample_inhomogeneous_events(PiecewiseFlatCurve({0, 1}, {1, 3}), 2.0, rng);
        ASSERT_EQ(p.event_times.size(), p.severities.size());
        for (std::size_t k = 0; k < p.event_times.size(); ++k) {
            EXPECT_GT(p.event_times[k], k ? p.event_times[k - 1] : 0.0);
            EXPECT_LE(p.event_times[k], 2.0);
        }
    }
}

TEST(Sampling, HomogeneousCountMoments) {
    expect_mean_and_variance(
        event_counts(100000, 21, [](PathRng& r) { return sample_homogeneous_events(2.0, 5.0, r); }), 10.0);
}

TEST(Sampling, InhomogeneousCountMoments) {
    const PiecewiseFlatCurve z({0, 1}, {1, 3});
    expect_mean_and_variance(
        event_counts(100000, 22, [&](PathRng& r) { return sample_inhomogeneous_events(z, 2.0, r); }), 4.0);
    expect_mean_and_variance(
        event_counts(100000, 23, [](PathRng& r) { return sample_inhomogeneous_events(PiecewiseFlatCurve::flat(2.0), 5.0, r); }),
        10.0);
}

TEST(Sampling, ChiSquareGoodnessOfFit) {
    const PiecewiseFlatCurve z({0, 1}, {1, 3});
    EXPECT_GT(poisson_gof_pvalue(event_counts(100000, 31, [](PathRng& r) { return sample_homogeneous_events(2.0, 5.0, r); }),
                                 10.0),
              1e-3);
    EXPECT_GT(poisson_gof_pvalue(event_counts(100000, 32, [&](PathRng& r) { return sample_inhomogeneous_events(z, 2.0, r); }),
                                 4.0),
              1e-3);
    // Sub-window counts of the inhomogeneous sampler are Poisson too.
    const auto window = event_counts(100000, 33, [&](PathRng& r) {
        EventPath p = sample_inhomogeneous_events(z, 2.0, r);
        EventPath w;
        for (double t : p.event_times) {
            if (t > 0.5 && t <= 1.5) w.event_times.push_back(t);
        }
        return w;
    });
    EXPECT_GT(poisson_gof_pvalue(window, 0.5 + 1.5), 1e-3);
    // And the test does reject a wrong intensity.
    EXPECT_LT(poisson_gof_pvalue(event_counts(100000, 34, [](PathRng& r) { return sample_homogeneous_events(2.1, 5.0, r); }),
                                 10.0),
              1e-3);
}

TEST(IntegratedSurvival, Conventions) {
    const EventPath p{{0.5, 1.5}, {0.5, 0.2}, 2.0};
    EXPECT_EQ(integrated_survival(p, 0.6, 1.4, SurvivalConvention::exp_severity), 1.0);
    EXPECT_NEAR(integrated_survival(p, 0.0, 1.0, SurvivalConvention::exp_severity), 0.606530659713, 1e-12);
    EXPECT_EQ(integrated_survival(p, 0.0, 1.0, SurvivalConvention::one_minus_severity), 0.5);
    EXPECT_NEAR(integrated_survival(p, 0.0, 2.0, SurvivalConvention::one_minus_severity), 0.4, 1e-15);
    EXPECT_EQ(integrated_survival(p, 0.5, 1.0, SurvivalConvention::exp_severity), 1.0);
    const EventPath bad{{0.5}, {1.5}, 1.0};
    try {
        integrated_survival(bad, 0.0, 1.0, SurvivalConvention::one_minus_severity);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::convention);
    }
    EXPECT_THROW(integrated_survival(p, 1.0, 0.5, SurvivalConvention::exp_severity), Error);
}

TEST(MonteCarlo, ZeroIntensityIsExact) {
    const FixedSeverityDirac none{PiecewiseFlatCurve::flat(0.0), 0.3};
    const MCResult r = mc_defaultable_zcb(none, r2, 5, {1000, 1, 1}, SurvivalConvention::exp_severity);
    EXPECT_EQ(r.estimate, std::exp(-0.1));
    EXPECT_EQ(r.std_error, 0.0);
}

TEST(MonteCarlo, MomentIdentities) {
    const FixedSeverityDirac sev{PiecewiseFlatCurve::flat(2.0), 0.1};
    const PiecewiseFlatCurve r0 = PiecewiseFlatCurve::flat(0.0);
    const MCResult e = mc_defaultable_zcb(sev, r0, 5, {200000, 41, 0}, SurvivalConvention::exp_severity);
    EXPECT_LT(std::abs(e.z_score(std::exp((std::exp(-0.1) - 1) * 10))), 3.0);
    const MCResult m = mc_defaultable_zcb(sev, r0, 5, {200000, 42, 0}, SurvivalConvention::one_minus_severity);
    EXPECT_LT(std::abs(m.z_score(std::exp(-0.1 * 10))), 3.0);
    // Count-conditional estimator is exact for fixed severity.
    const MCResult c = mc_defaultable_zcb(sev, r0, 5, {1000, 43, 0}, SurvivalConvention::exp_severity,
                                          McEstimator::poisson_conditional);
    EXPECT_NEAR(c.estimate, std::exp((std::exp(-0.1) - 1) * 10), 1e-12);
}

TEST(MonteCarlo, DegenerateOuMatchesFixedSeverity) {
    const BandTransform band{2.0};
    const OuSeverityHazard hz{{0.0, 0.5, 0.0, 0.3, 1.0}, band, PiecewiseFlatCurve::flat(2.0), std::nullopt};
    const double s = band.severity(0.3);
    const MCResult r = mc_defaultable_zcb(hz, r2, 5, {200000, 44, 0}, SurvivalConvention::one_minus_severity);
    EXPECT_LT(std::abs(r.z_score(std::exp(-0.1) * std::exp(-s * 10))), 3.0);
}

TEST(MonteCarlo, SeedAndThreadDeterminism) {
    const OuSeverityHazard hz{{0.001, 0.73, 0.6, 0.0, 1.0}, {6.0}, PiecewiseFlatCurve::flat(2.0), std::nullopt};
    const MCResult a = mc_defaultable_zcb(hz, r2, 5, {50000, 9, 1}, SurvivalConvention::one_minus_severity);
    const MCResult b = mc_defaultable_zcb(hz, r2, 5, {50000, 9, 4}, SurvivalConvention::one_minus_severity);
    const MCResult c = mc_defaultable_zcb(hz, r2, 5, {50000, 9, 3}, SurvivalConvention::one_minus_severity);
    const MCResult d = mc_defaultable_zcb(hz, r2, 5, {50000, 10, 1}, SurvivalConvention::one_minus_severity);
    EXPECT_EQ(std::memcmp(&a.estimate, &b.estimate, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.std_error, &b.std_error, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&a.estimate, &c.estimate, sizeof(double)), 0);
    EXPECT_NE(a.estimate, d.estimate);
    EXPECT_EQ(a.n_paths, 50000u);
    EXPECT_EQ(a.seed, 9u);
}

TEST(MonteCarlo, StandardErrorScaling) {
    const FixedSeverityDirac sev{PiecewiseFlatCurve::flat(2.0), 0.3};
    const MCResult small = mc_defaultable_zcb(sev, r2, 5, {20000, 51, 0}, SurvivalConvention::exp_severity);
    const MCResult large = mc_defaultable_zcb(sev, r2, 5, {320000, 51, 0}, SurvivalConvention::exp_severity);
    EXPECT_NEAR(large.std_error / small.std_error, 0.25, 0.025);
}

TEST(MonteCarlo, ErrorsPropagateFromWorkers) {
    const OuSeverityHazard hz{{0.0, 0.0, 0.5, 0.0, 1.0}, {1.0}, PiecewiseFlatCurve::flat(2.0), std::nullopt};
    EXPECT_THROW(mc_defaultable_zcb(hz, r2, 1, {1, 1, 1}, SurvivalConvention::exp_severity), Error);
    const FixedSeverityDirac big{PiecewiseFlatCurve::flat(5.0), 1.5};
    EXPECT_THROW(mc_defaultable_zcb(big, r2, 1, {10000, 1, 2}, SurvivalConvention::one_minus_severity), Error);
}

TEST(SwaptionMonteCarlo, ZeroIntensityAndCollapse) {
    const OUParams p{0.001, 0.73, 0.0, 0.0, 1.0};
    const StateEngine e = build_engine(p, {6.0}, GridSpec{101, 6.0, 18, 39}, SurvivalConvention::one_minus_severity,
                                       VolSwitch{0.0, 1.0});
    const CDSContract c = CDSContract::make(1, 6, 0, 0.6);
    const double k[] = {0.5, 1.0, 1.5};
    const auto zero = mc_cds_swaption(e, c, 1.0, r2, PiecewiseFlatCurve::flat(0.0), k, {1000, 1, 1});
    for (const auto& r : zero) EXPECT_EQ(r.estimate, 0.0);

    const auto zeta = PiecewiseFlatCurve::flat(2.0);
    const SwaptionPrices sp = cds_swaption(e, c, 1.0, r2, zeta, k);
    const auto mc = mc_cds_swaption(e, c, 1.0, r2, zeta, k, {200000, 2, 0});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(std::abs(mc[i].z_score(sp.prices[i])), 3.0);
}
