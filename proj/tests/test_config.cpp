#include <gtest/gtest.h>

#include "dirac/config.hpp"

using namespace dirac;

namespace {

std::vector<std::string> issues_of(const std::string& text) {
    try {
        parse_config_string(text);
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        return e.issues();
    }
    return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
    for (const auto& s : issues) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

const std::string bond_cfg = R"(
[model]
theta = 0.001
mu = 0.73
sigma = 0.6
band = 6
intensity = 2
[market]
rate = 0.02
[instrument]
type = zcb-defaultable
maturity = 5
)";

}  // namespace

TEST(Config, ShippedExample) {
    const RunConfig cfg = parse_config(std::string(DIRAC_SOURCE_DIR) + "/configs/paper_example.cfg");
    EXPECT_EQ(cfg.model.kind, ModelKind::ou_severity);
    EXPECT_EQ(cfg.model.band, 6.0);
    EXPECT_EQ(cfg.model.ou.t_step, 1.0);
    EXPECT_EQ(cfg.model.ou.mu, 0.73);
    EXPECT_EQ(cfg.model.ou.sigma, 0.6);
    EXPECT_EQ(cfg.model.sigma_after.value(), 0.1);
    EXPECT_EQ(cfg.model.ou.theta, 0.001);
    EXPECT_EQ(cfg.model.ou.x0, 0.0);
    EXPECT_EQ(cfg.market.recovery, 0.4);
    EXPECT_EQ(cfg.market.rate.value(3.0), 0.02);
    EXPECT_EQ(cfg.model.intensity.value(3.0), 2.0);
    EXPECT_EQ(cfg.model.convention, SurvivalConvention::one_minus_severity);
    EXPECT_EQ(cfg.instrument.type, InstrumentType::cds_swaption);
    EXPECT_EQ(cfg.instrument.expiry, 1.0);
    EXPECT_EQ(cfg.instrument.start, 1.0);
    EXPECT_EQ(cfg.instrument.end, 6.0);
    EXPECT_EQ(cfg.instrument.strike_multiples, (std::vector<double>{0.5, 0.75, 1, 1.25, 1.5, 2}));
    EXPECT_EQ(cfg.mc.paths, 500000u);
    EXPECT_EQ(cfg.mc.seed, 42u);
    const auto vs = vol_switch_for(cfg);
    ASSERT_TRUE(vs.has_value());
    EXPECT_EQ(vs->switch_time, 1.0);
    const StateEngine e = engine_for(cfg);
    EXPECT_EQ(e.size(), 201u);
    EXPECT_TRUE(e.transition_after.has_value());
}

TEST(Config, MinimalBond) {
    const RunConfig cfg = parse_config_string(bond_cfg);
    EXPECT_EQ(cfg.instrument.maturity, 5.0);
    EXPECT_FALSE(vol_switch_for(cfg).has_value());
    EXPECT_EQ(cfg.mc.paths, 100000u);
}

TEST(Config, EmptyFileListsEverySection) {
    const auto issues = issues_of("");
    EXPECT_EQ(issues.size(), 3u);
    EXPECT_TRUE(mentions(issues, "[model]"));
    EXPECT_TRUE(mentions(issues, "[market]"));
    EXPECT_TRUE(mentions(issues, "[instrument]"));
}

TEST(Config, NegativeSigmaIsOneTargetedError) {
    std::string text = bond_cfg;
    text.replace(text.find("sigma = 0.6"), 11, "sigma = -0.6");
    const auto issues = issues_of(text);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_TRUE(mentions(issues, "model.sigma"));
}

TEST(Config, UnknownKeysAndSections) {
    const auto issues = issues_of(bond_cfg + "colour = blue\n[extras]\nx = 1\n");
    EXPECT_TRUE(mentions(issues, "instrument.colour: unknown key"));
    EXPECT_TRUE(mentions(issues, "unknown section [extras]"));
}

TEST(Config, CollectsAllProblems) {
    const auto issues = issues_of(R"(
[model]
theta = abc
sigma = 0.1
band = 0.5
intensity = 0:1, 0:2
[market]
rate = 0.02
recovery = 1.5
[instrument]
type = cds
[mc]
paths = 1
estimator = magic
)");
    EXPECT_TRUE(mentions(issues, "model.theta: not a finite number"));
    EXPECT_TRUE(mentions(issues, "model.mu: missing required key"));
    EXPECT_TRUE(mentions(issues, "model.band: must be >= 1"));
    EXPECT_TRUE(mentions(issues, "model.intensity"));
    EXPECT_TRUE(mentions(issues, "market.recovery"));
    EXPECT_TRUE(mentions(issues, "instrument.end: missing required key"));
    EXPECT_TRUE(mentions(issues, "mc.paths"));
    EXPECT_TRUE(mentions(issues, "mc.estimator"));
    EXPECT_GE(issues.size(), 8u);
}

TEST(Config, Curves) {
    RunConfig cfg = parse_config_string(R"(
[model]
kind = fixed-severity
severity = 0.1
intensity = 0:1, 1:3
[market]
rate = 0: 0.01 , 1 : 0.03
[instrument]
type = zcb-semi
maturity = 1
default_horizon = 0.9
)");
    EXPECT_EQ(cfg.model.kind, ModelKind::fixed_severity);
    EXPECT_EQ(cfg.model.convention, SurvivalConvention::exp_severity);
    EXPECT_NEAR(integrate(cfg.market.rate, 0, 2), 0.04, 1e-15);
    EXPECT_NEAR(integrate(cfg.model.intensity, 0, 2), 4.0, 1e-15);
    EXPECT_EQ(cfg.instrument.default_horizon, 0.9);
    EXPECT_TRUE(mentions(issues_of(bond_cfg + "[market]\n"), "syntax error"));
}

TEST(Config, SyntaxAndFileErrors) {
    EXPECT_TRUE(mentions(issues_of("[model\nx=1\n"), "syntax error"));
    EXPECT_THROW(parse_config("/nonexistent/file.cfg"), ConfigError);
}

TEST(Config, ModelKindSpecificKeys) {
    const auto issues = issues_of(R"(
[model]
kind = fixed-severity
severity = 0.1
sigma = 0.3
intensity = 1
[market]
rate = 0.02
[instrument]
type = zcb-defaultable
maturity = 1
)");
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_TRUE(mentions(issues, "model.sigma: only used by ou-severity models"));
}

TEST(Config, SwaptionChecks) {
    const auto issues = issues_of(R"(
[model]
theta = 0
mu = 0
sigma = 0.1
band = 2
intensity = 1
[market]
rate = 0.02
[instrument]
type = cds-swaption
expiry = 2
start = 1
end = 6
strikes = 1, -2
)");
    EXPECT_TRUE(mentions(issues, "market.recovery: missing required key"));
    EXPECT_TRUE(mentions(issues, "instrument.expiry: must not be after the CDS start"));
    EXPECT_TRUE(mentions(issues, "instrument.strikes"));
}
