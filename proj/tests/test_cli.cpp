#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "pricer_app.hpp"

namespace fs = std::filesystem;

namespace {

const std::string example_cfg = std::string(DIRAC_SOURCE_DIR) + "/configs/paper_example.cfg";

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "dirac_pricer");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = dirac::app::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string write_temp(const std::string& name, const std::string& text) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream(p) << text;
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string bond_config(const std::string& extra = "") {
    return R"(
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
[mc]
estimator = poisson-conditional
)" + extra;
}

}  // namespace

TEST(Cli, PriceSwaption) {
    const std::string csv = (fs::temp_directory_path() / "dirac_swaption.csv").string();
    const Result r = run({"price", "cds-swaption", "--config", example_cfg, "--out", csv});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("price = "), std::string::npos);
    const auto rows = lines(slurp(csv));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "instrument,expiry,start,end,strike,forward_spread,annuity,price");
}

TEST(Cli, Smile) {
    const Result r = run({"smile", "--config", example_cfg, "--strikes", "0.5,0.75,1,1.25,1.5,2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 7u);
    EXPECT_EQ(rows[0], "strike,forward,price,implied_vol,flag");
    // 12 significant digits.
    EXPECT_EQ(rows[3].substr(0, rows[3].find(',')).size(), 13u);
}

TEST(Cli, OracleCompareBond) {
    const std::string cfg = write_temp("dirac_bond.cfg", bond_config());
    const Result r = run({"oracle-compare", "--config", cfg, "--paths", "20000", "--seed", "42"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "instrument,strike,analytic,mc_mean,std_error,z_score");
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
    const std::string cfg = write_temp("dirac_swaption_small.cfg", slurp(example_cfg));
    ::setenv("DIRAC_PRICER_THREADS", "1", 1);
    const Result one = run({"oracle-compare", "--config", cfg, "--paths", "30000"});
    ::setenv("DIRAC_PRICER_THREADS", "3", 1);
    const Result three = run({"oracle-compare", "--config", cfg, "--paths", "30000"});
    ::unsetenv("DIRAC_PRICER_THREADS");
    ASSERT_EQ(one.code, 0) << one.err;
    EXPECT_EQ(one.out, three.out);
    EXPECT_EQ(lines(one.out).size(), 7u);
}

TEST(Cli, SimulateIsSeeded) {
    const std::string cfg = write_temp("dirac_bond2.cfg", bond_config());
    const Result a = run({"simulate", "--config", cfg, "--paths", "5", "--seed", "7"});
    const Result b = run({"simulate", "--config", cfg, "--paths", "5", "--seed", "7"});
    const Result c = run({"simulate", "--config", cfg, "--paths", "5", "--seed", "8"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, c.out);
    EXPECT_EQ(lines(a.out)[0], "path_id,event_time,severity");
    EXPECT_GT(lines(a.out).size(), 10u);
}

TEST(Cli, DumpEngine) {
    const Result r = run({"dump-engine", "--config", example_cfg});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 202u);
    EXPECT_EQ(rows[0], "node,x,severity,survival,initial,row_sum,row_sum_after");
}

TEST(Cli, OtherInstruments) {
    const std::string cds = write_temp("dirac_cds.cfg", R"(
[model]
kind = fixed-severity
severity = 0.5
intensity = 0.0847
[market]
rate = 0.02
recovery = 0.4
[instrument]
type = cds
start = 0
end = 5
premium = 0.02
)");
    Result r = run({"price", "cds", "--config", cds});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("par_spread = "), std::string::npos);

    const std::string irs = write_temp("dirac_irs.cfg", R"(
[model]
kind = fixed-severity
severity = 0
intensity = 0
[market]
rate = 0.02
[instrument]
type = irs
start = 0
end = 5
fixed_rate = 0.0202
)");
    r = run({"price", "irs", "--config", irs});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("value = "), std::string::npos);

    const std::string opt = write_temp("dirac_opt.cfg", R"(
[model]
theta = 0.001
mu = 0.73
sigma = 0.6
sigma_after = 0.1
band = 6
intensity = 2
n_nodes = 51
[market]
rate = 0.02
[instrument]
type = bond-option
expiry = 1
maturity = 5
strike = 0.5
option = put
)");
    r = run({"price", "bond-option", "--config", opt});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("option = put"), std::string::npos);

    const std::string semi = write_temp("dirac_semi.cfg", bond_config().replace(
        bond_config().find("type = zcb-defaultable"), 22, "type = zcb-semi\ndefault_horizon = 4"));
    r = run({"price", "zcb-semi", "--config", semi, "--convention", "exp"});
    ASSERT_EQ(r.code, 0) << r.err;
}

TEST(Cli, Errors) {
    Result r = run({"price", "cds", "--config", example_cfg});
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(r.err.rfind("error: module=cli kind=config message=", 0), 0u) << r.err;

    const std::string empty = write_temp("dirac_empty.cfg", "");
    r = run({"smile", "--config", empty});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("missing section [model]"), std::string::npos);
    EXPECT_NE(r.err.find("missing section [market]"), std::string::npos);
    EXPECT_NE(r.err.find("missing section [instrument]"), std::string::npos);

    r = run({"smile", "--config", example_cfg, "--convention", "sideways"});
    EXPECT_NE(r.code, 0);
    r = run({"bogus"});
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(r.err.rfind("error: module=cli kind=usage", 0), 0u);

    // Pricing errors carry the module that raised them.
    const std::string bad = write_temp("dirac_bad.cfg", bond_config() + "");
    r = run({"oracle-compare", "--config", bad, "--convention", "one-minus", "--paths", "1"});
    EXPECT_NE(r.code, 0);
    const std::string fixed = write_temp("dirac_fixed.cfg", R"(
[model]
kind = fixed-severity
severity = 2
intensity = 1
[market]
rate = 0.02
[instrument]
type = zcb-defaultable
maturity = 1
)");
    r = run({"price", "zcb-defaultable", "--config", fixed, "--convention", "one-minus"});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("kind=convention"), std::string::npos) << r.err;
}
