#include "qincompat/sweep.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace qincompat;
using Catch::Approx;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string temp_path(const char* name) {
  return std::string("sweep_test_") + name;
}

}  // namespace

TEST_CASE("sweep config validation and defaults") {
  SweepConfig empty;
  empty.thetas.clear();
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  for (Scenario s : {Scenario::fig3_counts, Scenario::fig4_theta_gamma, Scenario::fig5_phi,
                     Scenario::fig6_unequal, Scenario::single_point}) {
    const SweepConfig c = SweepConfig::defaults_for(s);
    c.validate();
    CHECK(parse_scenario(scenario_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_scenario("fig7"), std::invalid_argument);

  SweepConfig bad = SweepConfig::defaults_for(Scenario::fig4_theta_gamma);
  bad.shots = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sweep reruns are byte identical and rows satisfy the chi bound") {
  SweepConfig cfg = SweepConfig::defaults_for(Scenario::fig4_theta_gamma);
  cfg.thetas = {0.2, 0.5, std::numbers::pi / 4, 1.2};
  cfg.gammas = {0.7, 1.0};
  cfg.shots = 4000;
  cfg.seed = 11;
  cfg.out_path = temp_path("fig4.csv");

  const SweepResult r1 = run_sweep(cfg);
  const std::string bytes1 = slurp(r1.csv_paths.front());
  const SweepResult r2 = run_sweep(cfg);
  const std::string bytes2 = slurp(r2.csv_paths.front());
  CHECK(bytes1 == bytes2);

  // worker count must not change the output bytes
  SweepConfig par = cfg;
  par.workers = 4;
  const SweepResult r3 = run_sweep(par);
  CHECK(slurp(r3.csv_paths.front()) == bytes1);

  CHECK(bytes1.rfind("#schema=1 scenario=fig4_theta_gamma", 0) == 0);

  for (const SweepRow& row : r1.rows) {
    CHECK(row.chi_exact >= row.eta_closed - 2e-3);
    if (row.compatible) CHECK(row.chi_exact >= 1.0 - 1e-12);
    CHECK(row.p_hat >= 0.0);
    CHECK(row.p_hat <= 1.0);
    CHECK(row.p_se >= 0.0);
    if (row.p_exact < 1.0 - 1e-9) CHECK(row.p_se > 0.0);
  }
  std::remove(cfg.out_path.c_str());
}

TEST_CASE("fig5 sweep rows") {
  SweepConfig cfg = SweepConfig::defaults_for(Scenario::fig5_phi);
  cfg.shots = 2000;
  cfg.out_path = temp_path("fig5.csv");
  const SweepResult r = run_sweep(cfg);
  REQUIRE(r.rows.size() == cfg.phis.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const SweepRow& row = r.rows[i];
    const double expected = (2.0 + std::numbers::sqrt2) / (3.0 + std::cos(cfg.phis[i]));
    CHECK(row.chi_exact == Approx(expected).margin(1e-9));
    CHECK(row.eta_closed == Approx((2.0 + std::numbers::sqrt2) / 4.0).margin(1e-12));
    CHECK_FALSE(row.compatible);
  }
  std::remove(cfg.out_path.c_str());
}

TEST_CASE("fig6 rows with equal visibility sums have identical chi") {
  SweepConfig cfg = SweepConfig::defaults_for(Scenario::fig6_unequal);
  cfg.thetas = {0.3, 0.7, 1.1};
  cfg.alpha_betas = {{0.9, 0.5}, {0.7, 0.7}, {0.8, 0.6}};
  cfg.shots = 1000;
  cfg.out_path = temp_path("fig6.csv");
  const SweepResult r = run_sweep(cfg);
  REQUIRE(r.rows.size() == 9);
  // group by theta: all three (alpha, beta) pairs sum to 1.4
  for (std::size_t t = 0; t < 3; ++t) {
    const double ref = r.rows[t].chi_exact;
    for (std::size_t g = 1; g < 3; ++g) {
      CHECK(r.rows[g * 3 + t].chi_exact == Approx(ref).margin(1e-12));
    }
  }
  std::remove(cfg.out_path.c_str());
}

TEST_CASE("fig3 counts scenario writes one counts CSV per gamma") {
  SweepConfig cfg = SweepConfig::defaults_for(Scenario::fig3_counts);
  cfg.shots = 5000;
  cfg.out_path = temp_path("fig3.csv");
  const SweepResult r = run_sweep(cfg);
  REQUIRE(r.csv_paths.size() == 2);
  for (const std::string& p : r.csv_paths) {
    const std::string body = slurp(p);
    CHECK(body.rfind("prep_label,outcome,count,shots,seed\n", 0) == 0);
    CHECK(std::count(body.begin(), body.end(), '\n') == 9);
  }
  for (const std::string& p : r.csv_paths) std::remove(p.c_str());
}

TEST_CASE("plot scripts") {
  SweepConfig cfg = SweepConfig::defaults_for(Scenario::fig5_phi);
  cfg.phis = {-0.5, 0.0, 0.5};
  cfg.shots = 500;
  cfg.out_path = temp_path("plot5.csv");
  run_sweep(cfg);

  const std::string script = emit_plot_script(cfg.out_path, Scenario::fig5_phi,
                                              temp_path("plot5.gp"));
  const std::string body = slurp(script);
  CHECK(body.find("(2+sqrt(2))/(3+cos(phi))") != std::string::npos);
  CHECK(body.find("dashtype 2") != std::string::npos);  // constant robustness line
  CHECK(body.find("yerrorbars") != std::string::npos);

  // schema mismatch: wrong scenario for this CSV
  CHECK_THROWS_AS(emit_plot_script(cfg.out_path, Scenario::fig4_theta_gamma,
                                   temp_path("bad.gp")),
                  std::invalid_argument);

  // fig4 script carries one theory curve per gamma
  SweepConfig cfg4 = SweepConfig::defaults_for(Scenario::fig4_theta_gamma);
  cfg4.thetas = {0.3, 0.8};
  cfg4.gammas = {0.5, 0.7, 0.9, 1.0};
  cfg4.shots = 500;
  cfg4.out_path = temp_path("plot4.csv");
  run_sweep(cfg4);
  const std::string s4 = slurp(emit_plot_script(cfg4.out_path, Scenario::fig4_theta_gamma,
                                                temp_path("plot4.gp")));
  CHECK(s4.find("gamma=0.5") != std::string::npos);
  CHECK(s4.find("gamma=1") != std::string::npos);

  for (const char* f : {"plot5.csv", "plot5.gp", "plot4.csv", "plot4.gp"}) {
    std::remove(temp_path(f).c_str());
  }
}

TEST_CASE("jitter widens the reported standard error") {
  SweepConfig cfg = SweepConfig::defaults_for(Scenario::single_point);
  cfg.thetas = {0.6};
  cfg.gammas = {0.8};
  cfg.shots = 20000;
  cfg.out_path = temp_path("jitter.csv");

  const SweepResult plain = run_sweep(cfg);
  cfg.noise = NoiseSpec::exact(0.5);
  const SweepResult jittered = run_sweep(cfg);
  CHECK(jittered.rows.front().p_se > 1.05 * plain.rows.front().p_se);
  std::remove(cfg.out_path.c_str());
}
