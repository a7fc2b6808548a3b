#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "convkernel/harness.hpp"

using namespace convkernel;

namespace {
std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("config round-trips through its textual form") {
  ExperimentConfig cfg;
  cfg.inner = "rbf:0.5";
  cfg.d_grid = {16, 24, 32};
  cfg.beta_grid = {0.2, 0.35, 0.5};
  cfg.ell = 2.0;
  cfg.ell_sigma = 0.6;
  cfg.l_star = 2;
  cfg.lambda_mode = ExperimentConfig::LambdaMode::kOptimal;
  cfg.lambdas = {0.0, 1.0, 16.0};
  cfg.ell_lambda = 0.25;
  cfg.seeds = {1, 2, 3};
  cfg.out_dir = "some/dir";
  cfg.mode = ExperimentConfig::Mode::kBoundsAudit;
  cfg.svg = true;

  const ExperimentConfig back = ExperimentConfig::parse(cfg.to_string());
  CHECK(back == cfg);
  CHECK(back.hash() == cfg.hash());

  CHECK_THROWS_AS(ExperimentConfig::parse("[grid]\nwhat = 3\n"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("[grid]\nbroken line\n"), std::invalid_argument);

  // comments and blank lines are fine
  const ExperimentConfig commented =
      ExperimentConfig::parse("# hello\n[kernel]\ninner = exp\n\n[grid]\nd = 8\n");
  CHECK(commented.d_grid == std::vector<int>{8});
}

TEST_CASE("derived grid quantities") {
  ExperimentConfig cfg;
  cfg.ell = 2.0;
  CHECK(cfg.q_of(16, 0.5) == 4);
  CHECK(cfg.q_of(16, 0.8) == 7);   // round(9.19) clamped to (d-1)/2
  CHECK(cfg.q_of(16, 0.01) == 1);  // clamp from below
  CHECK(cfg.n_of(16) == 256);
  cfg.ell_sigma = 0.5;
  CHECK(cfg.sigma2_of(16) == doctest::Approx(0.25));
}

TEST_CASE("run: empty grid gives a header-only CSV") {
  ExperimentConfig cfg;
  cfg.d_grid = {};
  cfg.out_dir = "/tmp/convkernel_test_empty";
  const RunResult result = run(cfg);
  CHECK(result.rows.empty());
  CHECK(result.results_csv == sweep_csv_header());
  CHECK(!result.any_failed);
  CHECK(read_file("/tmp/convkernel_test_empty/results.csv") == sweep_csv_header());
}

TEST_CASE("run: risk sweep rows satisfy risk = bias + variance and rerun identically") {
  ExperimentConfig cfg;
  cfg.d_grid = {9};
  cfg.beta_grid = {0.4, 0.6};
  cfg.ell = 2.0;
  cfg.ell_sigma = 0.5;
  cfg.l_star = 2;
  cfg.lambdas = {0.5, 2.0};
  cfg.seeds = {1, 2};
  cfg.out_dir = "/tmp/convkernel_test_sweep";
  cfg.mode = ExperimentConfig::Mode::kRiskSweep;

  const RunResult a = run(cfg);
  CHECK(!a.any_failed);
  CHECK(a.rows.size() == 8);
  for (const auto& row : a.rows) {
    REQUIRE(row.error.empty());
    CHECK(row.risk == doctest::Approx(row.bias_sq + row.variance).epsilon(1e-12));
    CHECK(row.train_err_ratio >= 0.0);
  }
  const RunResult b = run(cfg);
  CHECK(a.results_csv == b.results_csv);
  CHECK(read_file("/tmp/convkernel_test_sweep/results.csv") == a.results_csv);
  CHECK(read_file("/tmp/convkernel_test_sweep/meta.txt").find("config_hash") != std::string::npos);
}

TEST_CASE("run: singular interpolator cells are isolated, not fatal") {
  ExperimentConfig cfg;
  cfg.d_grid = {12};
  cfg.beta_grid = {0.2};  // q = 2: fewer eigenfunctions than samples
  cfg.ell = 2.0;
  cfg.l_star = 2;
  cfg.lambdas = {0.0, 1.0};
  cfg.seeds = {1};
  cfg.out_dir = "/tmp/convkernel_test_singular";
  cfg.mode = ExperimentConfig::Mode::kRiskSweep;

  const RunResult result = run(cfg);
  REQUIRE(result.rows.size() == 2);
  CHECK(result.any_failed);
  CHECK(!result.rows[0].error.empty());  // lambda = 0 fails
  CHECK(result.rows[1].error.empty());   // lambda = 1 fine
}

TEST_CASE("run: trainerr sweep reports the grid optimum") {
  ExperimentConfig cfg;
  cfg.d_grid = {10};
  cfg.beta_grid = {0.5};
  cfg.ell = 2.0;
  cfg.ell_sigma = 0.0;
  cfg.l_star = 2;
  cfg.seeds = {3};
  cfg.out_dir = "/tmp/convkernel_test_trainerr";
  cfg.mode = ExperimentConfig::Mode::kTrainerrSweep;

  const RunResult result = run(cfg);
  REQUIRE(result.rows.size() == 1);
  const SweepRow& row = result.rows[0];
  REQUIRE(row.error.empty());
  CHECK(row.lambda >= 1e-3);
  CHECK(row.lambda <= 1e3);
  CHECK(row.train_err_ratio > 0.0);
  CHECK(row.train_err_ratio < 1.0);

  // the optimum is no worse than the endpoints of the lambda grid
  const Cell cell = make_cell(cfg, 10, 0.5, 3);
  CHECK(row.risk <= cell.sweep.eval(1e-3).risk + 1e-12);
  CHECK(row.risk <= cell.sweep.eval(1e3).risk + 1e-12);
}

TEST_CASE("run: bounds audit fills diagnostics columns") {
  ExperimentConfig cfg;
  cfg.d_grid = {12};
  cfg.beta_grid = {0.5};
  cfg.ell_sigma = 0.5;
  cfg.l_star = 2;
  cfg.lambdas = {1.0};
  cfg.seeds = {5};
  cfg.out_dir = "/tmp/convkernel_test_bounds";
  cfg.mode = ExperimentConfig::Mode::kBoundsAudit;

  const RunResult result = run(cfg);
  REQUIRE(result.rows.size() == 1);
  const SweepRow& row = result.rows[0];
  REQUIRE(row.error.empty());
  CHECK(row.m >= 0.0);
  CHECK(std::isfinite(row.concentration_norm));
  CHECK(row.r1 <= row.r2);
  CHECK(row.preconditions_ok >= 0);
}

TEST_CASE("empirical_rate_fit") {
  // synthetic rows with quantity = c * n^-0.4 exactly
  std::vector<SweepRow> rows;
  for (std::size_t n : {100u, 200u, 400u, 800u}) {
    SweepRow row;
    row.beta = 0.5;
    row.n = n;
    row.variance = 3.0 * std::pow(static_cast<double>(n), -0.4);
    row.bias_sq = 2.0;  // constant
    row.risk = row.variance + row.bias_sq;
    rows.push_back(row);
  }
  const auto var_fit = empirical_rate_fit(rows, FitQuantity::kVariance);
  REQUIRE(var_fit.size() == 1);
  CHECK(var_fit[0].slope == doctest::Approx(-0.4).epsilon(1e-9));
  CHECK(var_fit[0].residual <= 1e-9);
  const auto bias_fit = empirical_rate_fit(rows, FitQuantity::kBiasSq);
  CHECK(bias_fit[0].slope == doctest::Approx(0.0).epsilon(1e-12));

  // degenerate group: fewer than 3 distinct n
  rows.resize(2);
  CHECK_THROWS_AS(empirical_rate_fit(rows, FitQuantity::kVariance), std::invalid_argument);
}

TEST_CASE("run: rate_fit mode emits negative variance slopes") {
  ExperimentConfig cfg;
  cfg.d_grid = {10, 12, 14, 16};
  cfg.beta_grid = {0.5};
  cfg.ell = 1.6;
  cfg.ell_sigma = 0.0;
  cfg.l_star = 2;
  cfg.lambdas = {1.0};
  cfg.seeds = {1, 2};
  cfg.out_dir = "/tmp/convkernel_test_ratefit";
  cfg.mode = ExperimentConfig::Mode::kRateFit;

  const RunResult result = run(cfg);
  CHECK(!result.any_failed);
  const auto fits = empirical_rate_fit(result.rows, FitQuantity::kVariance);
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].slope < 0.0);
  CHECK(read_file("/tmp/convkernel_test_ratefit/rate_fit.csv").find("variance") != std::string::npos);
}

TEST_CASE("spearman rank correlation") {
  CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman_rho({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
  CHECK(std::abs(spearman_rho({1, 2, 3, 4, 5, 6}, {3, 1, 4, 1, 5, 9})) < 1.0);
  // monotone decreasing with ties still strongly negative
  const double rho = spearman_rho({1, 1, 2, 2, 3, 3}, {6, 5, 4, 3, 2, 1});
  CHECK(rho < -0.9);
  CHECK(spearman_p_negative(-0.9, 20) < 0.001);
  CHECK(spearman_p_negative(0.9, 20) > 0.999);
}

TEST_CASE("worker pool: exceptions propagate and output slots are stable") {
  setenv("CONVKERNEL_WORKERS", "4", 1);
  std::vector<double> out(64);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<double>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<double>(i * i));
  CHECK_THROWS_AS(parallel_for(8,
                               [&](std::size_t i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  unsetenv("CONVKERNEL_WORKERS");
}
