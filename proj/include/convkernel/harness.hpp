#pragma once

#include <functional>
#include <string>
#include <vector>

#include "convkernel/config.hpp"
#include "convkernel/krr.hpp"
#include "convkernel/rates.hpp"

namespace convkernel {

// Worker count: CONVKERNEL_WORKERS when set, machine parallelism otherwise.
std::size_t worker_count();

// Runs f(0..count-1) on the pool. Outputs must go to preassigned slots so the
// result is independent of scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& f);

// One grid cell of a sweep. NaN marks a value the mode did not compute; a
// nonempty error column marks a failed cell.
struct SweepRow {
  int d = 0;
  int q = 0;
  std::size_t n = 0;
  double beta = 0.0;
  double sigma2 = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double bias_sq, variance, risk, train_err_ratio;
  double m;
  double concentration_norm, tau1, tau2, r1, r2;
  int preconditions_ok = -1;  // -1 = not evaluated
  double bias_lo, bias_hi, var_lo, var_hi;
  std::string error;

  SweepRow();
};

std::string sweep_csv_header();
std::string sweep_row_csv(const SweepRow& row);

// Shared per-cell state: dataset, Gram and squared-Gram matrices, and the
// ridge sweep evaluator.
struct Cell {
  Dataset dataset;
  ConvKernel kernel;
  double lambda_star = 0.0;
  Eigen::MatrixXd gram_matrix;
  Eigen::MatrixXd sq_gram_matrix;
  RidgeSweep sweep;
};

Cell make_cell(const ExperimentConfig& cfg, int d, double beta, std::uint64_t seed);

// Grid-optimal ridge: 61 log-spaced points in [1e-3, 1e3], refined once with
// another 61 points around the argmin's neighbors. Returns (lambda, point).
struct GridOptimum {
  double lambda = 0.0;
  RidgeSweep::Point point;
};

GridOptimum optimize_ridge(const RidgeSweep& sweep);

struct RunResult {
  std::vector<SweepRow> rows;
  std::string results_csv;
  bool any_failed = false;
};

// Executes the config's mode over the full grid x seeds, writes
// results.csv / meta.txt (and rate_fit.csv, plot.svg where applicable) under
// cfg.out_dir. Byte-identical outputs for identical configs, serial or
// parallel.
RunResult run(const ExperimentConfig& cfg);

// Per-beta OLS of log(quantity) against log(n).
struct RateFit {
  double beta = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // RMS of OLS residuals
  std::size_t count = 0;
};

enum class FitQuantity { kBiasSq, kVariance, kRisk };

std::vector<RateFit> empirical_rate_fit(const std::vector<SweepRow>& rows, FitQuantity quantity);

// ---------------------------------------------------------------------------
// Small statistics helpers used by the harness and the acceptance suite.
// ---------------------------------------------------------------------------

// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);
// One-sided p-value for rho < 0 via the t approximation.
double spearman_p_negative(double rho, std::size_t n);

// ---------------------------------------------------------------------------
// Verification suite (the `verify` CLI subcommand).
// ---------------------------------------------------------------------------

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
  std::string table() const;
};

VerifyReport verify(bool full);

// Individual oracle checks, parameterized so the verify suite and the
// acceptance suite share one implementation.
namespace checks {

// Closed-form counts vs. brute-force enumeration over all size-l subsets,
// exact integer equality, for 0 <= l <= q <= max_q and d in d_values.
VerifyCheck combinatorics(const std::vector<int>& d_values, int max_q);

// Krawtchouk-projected xi vs. exhaustive 2^q projection (<= 1e-10 relative),
// and the reconstruction identity at all q+1 nodes, for q <= max_q and each
// inner-function variant.
VerifyCheck xi_reconstruction(int max_q);

// Nonzero eigenvalues of the 2^d operator matrix vs. the closed-form
// spectrum, with multiplicities, max |diff| <= 1e-10, within a time budget.
VerifyCheck spectrum_oracle(int d, int q, double time_budget_seconds);

// |Q_l(x,x) - 1| <= 1e-12 for l = 0..q at random points.
VerifyCheck q_diagonal(int d, int q);

// Trace identity sum_S lambda_S = kappa(1) across inner variants.
VerifyCheck trace_identity();

// Closed-form bias/variance vs. Monte-Carlo within stderr_mult standard
// errors at each ridge level.
VerifyCheck risk_closed_vs_mc(int d, int q, std::size_t n, double sigma, int l_star,
                              const std::vector<double>& lambdas, std::size_t draws,
                              double stderr_mult, std::uint64_t seed);

// Fixed-design sandwich audit over seeds: zero-tolerance inequality checks
// whenever the respective preconditions hold (variance: concentration + r1 > 0;
// bias: additionally f* within the first m). Audits both the
// select_truncation m and m = 1. Reports precondition fractions.
struct SandwichStats {
  std::size_t cells = 0;
  std::size_t var_checked = 0;
  std::size_t bias_checked = 0;
  std::size_t violations = 0;
  std::size_t full_preconditions = 0;  // at the select_truncation m
  std::size_t auto_cells = 0;
};
VerifyCheck sandwich_audit(int d, int q, std::size_t n, int l_star, double sigma,
                           const std::vector<double>& lambdas, std::size_t n_seeds,
                           SandwichStats* stats_out);

// All-preconditions-true sandwich exercise (larger n so concentration holds with f*
// in span; checks all four inequalities non-vacuously).
VerifyCheck bias_sandwich_live();

// Fixed-design training-error formula vs. noise-resampling Monte-Carlo, and
// the exact zero at ridge 0.
VerifyCheck trainerr_formula(int d, int q, std::size_t n, double sigma, int l_star,
                             double lambda, std::size_t draws, std::uint64_t seed);

// Rate-calculus point values, grid-scan agreement on random parameter draws,
// and the reference phase-diagram structure.
VerifyCheck rates_calculus(std::size_t n_random_draws);

// Same config run twice, serial and parallel: byte-identical results.csv.
VerifyCheck determinism_roundtrip();

// Desk-scale phase-transition trend (risk-ratio Spearman over the surviving
// interpolator cells; per-seed trainerr-ratio direction).
VerifyCheck phase_trend();

// Training-error-ratio endpoints at the largest dimension: close to 1 well
// below beta*, bounded away from 1 well above it.
VerifyCheck trainerr_endpoints();

}  // namespace checks

}  // namespace convkernel
