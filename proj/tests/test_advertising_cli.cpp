#include "emlq/advertising.hpp"
#include "emlq/cli.hpp"
#include "emlq/config.hpp"
#include "emlq/errors.hpp"
#include "emlq/riccati.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace emlq;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = std::string(EMLQ_SOURCE_DIR) + "/configs/";

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emlq_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("advertising defaults map to the expected coefficients") {
  const AdvertisingScenario s;
  CHECK(scenario_violations(s).empty());
  CHECK(s.rate() == doctest::Approx(0.2));
  CHECK(s.b1() + s.c1 * s.resolved_d1() == doctest::Approx(0.0));
  const TimeGrid g = build_time_grid(10.0, 0.01);
  const GameCoefficients c = build_scenario(s, g);
  CHECK(c.a1[0](0, 0) == doctest::Approx(-0.4));
  CHECK(c.c1[0](0, 0) == 1.0);
  CHECK(c.g1(0, 0) == 1000.0);
  CHECK(c.g2(0, 0) == 2000.0);
}

TEST_CASE("advertising constraint violations are all listed") {
  AdvertisingScenario s;
  s.c1 = 0.1;  // rate < 0
  s.d1 = 2.0;  // b1 + c1 d1 != 0
  const auto v = scenario_violations(s);
  CHECK(v.size() >= 2);
  CHECK_THROWS_AS(build_scenario(s, build_time_grid(10.0, 0.01)), ConfigError);
  AdvertisingScenario t;
  t.horizon = -1.0;
  CHECK_FALSE(scenario_violations(t).empty());
}

TEST_CASE("figure data ends at the terminal values") {
  const AdvertisingScenario s;
  const TimeGrid g = build_time_grid(10.0, 0.01);
  const RiccatiSolution r = solve_riccati(build_scenario(s, g));
  const auto rows = figure_data(s, r);
  REQUIRE(rows.size() == static_cast<std::size_t>(g.steps() + 1));
  CHECK(rows.back().t == doctest::Approx(10.0));
  CHECK(rows.back().pi1 == doctest::Approx(1000.0));
  CHECK(rows.back().pi2 == doctest::Approx(2000.0));
  CHECK(rows.back().pi1_display == doctest::Approx(1000.0));
  CHECK(rows.front().pi1 > rows.back().pi1);
  CHECK(linear_ode_solution(5.0, 0.0, 0.0, 1.0, 0.0) == 5.0);
}

TEST_CASE("configuration parsing errors") {
  CHECK_THROWS_AS(parse_config("scenario = advertising\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dt = 1e-3\ndt = 1e-2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dt = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("damping = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("scenario = blocks\nT = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_matrix("1 2; 3"), ConfigError);
  CHECK(parse_matrix("1, 2; 3 4")(1, 0) == 3.0);
  const RunConfig cfg = parse_config("# comment\nT = 2\ndt = 0.01\nseed = 7\n");
  CHECK(cfg.horizon == 2.0);
  CHECK(cfg.seed == 7u);
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("CLI exit codes") {
  const fs::path out = scratch("cli");
  CHECK(run({"emlq", "bogus"}) == kExitConfig);
  CHECK(run({"emlq", "riccati", "--config", kConfigs + "scalar_toy.cfg", "--frobnicate"}) ==
        kExitConfig);
  CHECK(run({"emlq", "riccati"}) == kExitConfig);
  CHECK(run({"emlq", "riccati", "--config", "/nonexistent.cfg", "--out", out.string()}) ==
        kExitConfig);
  CHECK(run({"emlq", "riccati", "--config", kConfigs + "scalar_toy.cfg", "--out", out.string()}) ==
        kExitOk);
  CHECK(fs::exists(out / "riccati.csv"));
  CHECK(fs::exists(out / "run_info.csv"));
  std::string err;
  CHECK(run({"emlq", "gamma", "--config", kConfigs + "unsolvable.cfg", "--out", out.string(),
             "--max-iter", "5"},
            &err) == kExitSolver);
  CHECK(err.find("converge") != std::string::npos);
  CHECK(run({"emlq", "export-figures", "--config", kConfigs + "advertising.cfg", "--out",
             out.string(), "--dt", "1e-2"}) == kExitOk);
  CHECK(fs::exists(out / "figures.csv"));
  fs::remove_all(out);
}

TEST_CASE("advertising Gamma/Lambda solve diverges and says so") {
  const fs::path out = scratch("adv_gamma");
  CHECK(run({"emlq", "gamma", "--config", kConfigs + "advertising.cfg", "--out", out.string(),
             "--dt", "1e-2", "--max-iter", "20"}) == kExitSolver);
  CHECK(run({"emlq", "gamma", "--config", kConfigs + "advertising.cfg", "--out", out.string()}) ==
        kExitConfig);  // dt = 1e-3 exceeds the Lambda storage guard
  fs::remove_all(out);
}

TEST_CASE("verify writes its report") {
  const fs::path out = scratch("verify");
  const int code = run({"emlq", "verify", "--config", kConfigs + "scalar_toy.cfg", "--out",
                        out.string(), "--paths", "2000", "--threads", "2"});
  CHECK((code == kExitOk || code == kExitVerify));
  CHECK(fs::exists(out / "acceptance.csv"));
  std::ifstream in(out / "acceptance.csv");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 11);
  fs::remove_all(out);
}
