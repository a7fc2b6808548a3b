#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

#include "convkernel/spectrum.hpp"

namespace convkernel {

// A fitted kernel ridge regression model: dual coefficients alpha solving
// (K + ridge I) alpha = y. ridge = 0 is solved on K itself (min-norm
// interpolator); a numerically singular K raises SingularSystemError instead
// of being silently regularized.
struct KrrModel {
  Dataset dataset;
  ConvKernel kernel;
  double ridge = 0.0;
  Eigen::MatrixXd gram;
  Eigen::VectorXd dual_coeffs;
  double solver_residual = 0.0;
};

KrrModel fit(const Dataset& dataset, const ConvKernel& kernel, double ridge);

double predict(const KrrModel& model, const HypercubePoint& x);

struct RiskReport {
  double bias_sq = 0.0;
  double variance = 0.0;
  double risk = 0.0;
  enum class Method { kClosedForm, kMonteCarlo } method = Method::kClosedForm;
  double bias_stderr = 0.0;      // monte-carlo only
  double variance_stderr = 0.0;  // monte-carlo only
  bool degenerate = false;       // single-draw variance estimate
};

// Exact population bias^2/variance over the test distribution and the noise,
// using the full finite eigen-expansion (squared-kernel matrix S evaluated
// exactly): Bias^2 = a'a - 2a'P'H^-1 P D a + a'P'H^-1 S H^-1 P a,
// Variance = sigma^2 Tr(H^-1 S H^-1). No sampling anywhere.
RiskReport closed_form_risk(const KrrModel& model, const Spectrum& spectrum);

// Independent oracle: refit the dual solve for every fresh noise draw on the
// fixed design and estimate the bias/variance decomposition black-box.
// Batched means give the standard errors; the bias estimate is debiased by
// variance/draws-per-batch.
struct McTestMode {
  enum class Kind { kExhaustive, kSampled } kind = Kind::kExhaustive;
  std::size_t sample_count = 0;
  std::uint64_t sample_seed = 0;

  static McTestMode exhaustive() { return {}; }
  static McTestMode sampled(std::size_t count, std::uint64_t seed) {
    return {Kind::kSampled, count, seed};
  }
};

RiskReport monte_carlo_risk(const Dataset& dataset, const ConvKernel& kernel, double ridge,
                            std::size_t noise_draws, const McTestMode& test_mode);

// E_eps[(1/n) sum_i (f_hat(x_i) - y_i)^2] = (ridge^2/n)(sigma^2 Tr(H^-2) + f'H^-2 f),
// exactly 0 at ridge = 0.
double expected_training_error(const KrrModel& model, const Spectrum& spectrum);

// Fixed-design sandwich bounds on bias^2 and variance at truncation index m,
// evaluated verbatim together with the exact closed-form values and the
// preconditions (feature-matrix concentration, r1 > 0, f* within the first m
// eigenfunctions). The variance bounds need only concentration and r1 > 0; the bias
// bounds are omitted (NaN) when f* is not in the span.
struct BoundsReport {
  std::size_t m = 0;
  DiagnosticsReport diag;
  double bias_lo = 0.0, bias_hi = 0.0;
  double var_lo = 0.0, var_hi = 0.0;
  double bias_exact = 0.0, var_exact = 0.0;
  bool concentration_ok = false;
  bool r1_positive = false;
  bool fstar_in_span = false;
  bool preconditions_ok = false;  // all three
};

BoundsReport fixed_design_bounds(const Dataset& dataset, const ConvKernel& kernel,
                                 const Spectrum& spectrum, double ridge,
                                 std::optional<std::size_t> m = std::nullopt);

// Expert variant: a general nonnegative coefficient vector over the first m
// eigenfunctions stands in for the one-hot monomial (labels are ignored; the
// fixed-design quantities depend only on the design, f*, sigma^2, ridge).
BoundsReport fixed_design_bounds(const Dataset& dataset, const ConvKernel& kernel,
                                 const Spectrum& spectrum, double ridge, std::size_t m,
                                 const Eigen::VectorXd& expert_a);

// Eigendecomposition-backed evaluator for sweeping many ridge levels over one
// dataset: O(n^2) per ridge after one O(n^3) setup. Shares no code path with
// closed_form_risk's factorization route.
class RidgeSweep {
 public:
  RidgeSweep(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& sq_gram, const Eigen::VectorXd& fstar_values,
             double lambda_star, double sigma2);

  struct Point {
    double bias_sq = 0.0;
    double variance = 0.0;
    double risk = 0.0;
    double train_err = 0.0;
  };

  // ridge = 0 on a numerically rank-deficient gram throws SingularSystemError.
  Point eval(double ridge) const;
  bool gram_singular() const { return singular_; }
  double min_gram_eigenvalue() const { return evals_.minCoeff(); }

 private:
  Eigen::VectorXd evals_;
  Eigen::MatrixXd s_rotated_;
  Eigen::VectorXd s_rotated_diag_;
  Eigen::VectorXd u_rotated_;
  double lambda_star_;
  double sigma2_;
  double n_;
  bool singular_;
};

}  // namespace convkernel
