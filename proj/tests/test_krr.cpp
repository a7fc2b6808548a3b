#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "convkernel/errors.hpp"
#include "convkernel/krr.hpp"

using namespace convkernel;

namespace {
const InnerFunction kExp = InnerFunction::exponential();

Dataset distinct_dataset(std::size_t n, int d, int l_star, double sigma, std::uint64_t seed) {
  for (std::uint64_t s = seed;; ++s) {
    Dataset ds = make_dataset(n, d, l_star, sigma, s);
    if (!has_duplicate_points(ds.points)) return ds;
  }
}
}  // namespace

TEST_CASE("fit: scalar case, shrinkage, interpolation") {
  // n = 1: alpha = y / kappa(1)
  Dataset one = make_dataset(1, 6, 1, 0.0, 5);
  one.labels[0] = 3.0;
  const ConvKernel kernel{6, 2, kExp};
  const KrrModel scalar = fit(one, kernel, 0.0);
  CHECK(scalar.dual_coeffs(0) == doctest::Approx(3.0 / std::exp(1.0)).epsilon(1e-12));

  // huge ridge: |alpha| <= |y|/lambda and predictions shrink to zero
  const Dataset ds = distinct_dataset(60, 12, 2, 0.5, 7);
  const ConvKernel kernel12{12, 4, kExp};
  const KrrModel ridge = fit(ds, kernel12, 1e9);
  double y_norm = 0.0;
  for (double y : ds.labels) y_norm += y * y;
  CHECK(ridge.dual_coeffs.norm() <= std::sqrt(y_norm) / 1e9);
  CHECK(std::abs(predict(ridge, ds.points[0])) <= 1e-6);

  // lambda = 0 interpolates the training data (n well below the
  // eigenfunction count 1 + 12*2^3 = 97 keeps the gram invertible; a near-
  // square sample collapses the bottom eigenvalue to eps level)
  const Dataset ds64 = distinct_dataset(64, 12, 2, 0.5, 11);
  const KrrModel interp = fit(ds64, kernel12, 0.0);
  CHECK(interp.solver_residual <= 1e-8);
  for (std::size_t i = 0; i < ds64.size(); ++i)
    CHECK(std::abs(predict(interp, ds64.points[i]) - ds64.labels[i]) <= 1e-6);

  CHECK_THROWS_AS(fit(ds, kernel12, -1.0), std::invalid_argument);
}

TEST_CASE("fit: duplicated points make lambda = 0 singular") {
  Dataset ds = make_dataset(20, 12, 2, 0.5, 3);
  ds.points[1] = ds.points[0];
  ds.labels[1] = ds.labels[0] + 1.0;  // incompatible labels
  const ConvKernel kernel{12, 4, kExp};
  CHECK_THROWS_AS(fit(ds, kernel, 0.0), SingularSystemError);
}

TEST_CASE("predict: constant kernel gives constant predictions; re-evaluation oracle") {
  const Dataset ds = distinct_dataset(30, 10, 2, 0.3, 13);
  const ConvKernel constant{10, 3, InnerFunction::constant(2.0)};
  const KrrModel model = fit(ds, constant, 1.0);
  const PointList test = sample_points(5, 10, 99);
  const double first = predict(model, test[0]);
  for (const auto& x : test) CHECK(predict(model, x) == doctest::Approx(first).epsilon(1e-12));

  const ConvKernel kernel{10, 3, kExp};
  const KrrModel m2 = fit(ds, kernel, 0.5);
  for (const auto& x : test) {
    double expected = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      expected += m2.dual_coeffs(static_cast<Eigen::Index>(i)) * kernel_eval(kernel, ds.points[i], x);
    CHECK(predict(m2, x) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("closed-form risk: exact properties") {
  const int d = 12, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};

  // sigma = 0: variance exactly 0
  const Dataset noiseless = distinct_dataset(40, d, 2, 0.0, 17);
  const RiskReport rep0 = closed_form_risk(fit(noiseless, kernel, 1.0), sp);
  CHECK(rep0.variance == 0.0);
  CHECK(rep0.risk == rep0.bias_sq);

  // lambda -> infinity: bias^2 -> E[f*^2] = 1, variance -> 0
  const Dataset ds = distinct_dataset(40, d, 2, 0.5, 19);
  const RiskReport rep_inf = closed_form_risk(fit(ds, kernel, 1e12), sp);
  CHECK(rep_inf.bias_sq == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep_inf.variance <= 1e-12);

  // noise scaling: variance exactly linear in sigma^2, bias independent
  Dataset ds2 = ds;
  ds2.noise_variance = 4.0 * ds.noise_variance;
  const KrrModel m1 = fit(ds, kernel, 2.0);
  KrrModel m2 = m1;
  m2.dataset = ds2;
  const RiskReport r1 = closed_form_risk(m1, sp);
  const RiskReport r2 = closed_form_risk(m2, sp);
  CHECK(r2.variance == doctest::Approx(4.0 * r1.variance).epsilon(1e-10));
  CHECK(r2.bias_sq == doctest::Approx(r1.bias_sq).epsilon(1e-12));
}

TEST_CASE("ridge monotonicity of the closed-form bias and variance") {
  const int d = 12, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const Dataset ds = distinct_dataset(50, d, 2, 0.5, 23);
  double prev_bias = -1.0, prev_var = 1e300;
  for (double exponent = -3.0; exponent <= 3.0; exponent += 0.5) {
    const RiskReport rep = closed_form_risk(fit(ds, kernel, std::pow(10.0, exponent)), sp);
    CHECK(rep.bias_sq >= prev_bias - 1e-12);
    CHECK(rep.variance <= prev_var + 1e-12);
    prev_bias = rep.bias_sq;
    prev_var = rep.variance;
  }
}

TEST_CASE("monte-carlo risk: degenerate cases and the closed-form cross-check") {
  const int d = 10, q = 4;
  const ConvKernel kernel{d, q, kExp};
  const Spectrum sp = full_spectrum(d, q, kExp);
  const Dataset ds = distinct_dataset(48, d, 2, 0.5, 29);

  // sigma = 0: variance estimate exactly 0
  Dataset noiseless = ds;
  for (std::size_t i = 0; i < noiseless.size(); ++i)
    noiseless.labels[i] = noiseless.ground_truth_value(noiseless.points[i]);
  noiseless.noise_variance = 0.0;
  const RiskReport mc0 = monte_carlo_risk(noiseless, kernel, 1.0, 50, McTestMode::exhaustive());
  CHECK(mc0.variance == 0.0);

  // single draw: flagged degenerate, variance 0
  const RiskReport mc1 = monte_carlo_risk(ds, kernel, 1.0, 1, McTestMode::exhaustive());
  CHECK(mc1.degenerate);
  CHECK(mc1.variance == 0.0);

  // matches the closed form within 3 standard errors (both lambda values)
  for (double lambda : {0.0, 1.0}) {
    const RiskReport exact = closed_form_risk(fit(ds, kernel, lambda), sp);
    const RiskReport mc = monte_carlo_risk(ds, kernel, lambda, 1200, McTestMode::exhaustive());
    CHECK(std::abs(exact.bias_sq - mc.bias_sq) <= 3.0 * mc.bias_stderr);
    CHECK(std::abs(exact.variance - mc.variance) <= 3.0 * mc.variance_stderr);
  }

  // sampled test mode agrees too (extra sampling error on top)
  const RiskReport exact = closed_form_risk(fit(ds, kernel, 1.0), sp);
  const RiskReport mc_sampled =
      monte_carlo_risk(ds, kernel, 1.0, 1200, McTestMode::sampled(4000, 1234));
  CHECK(std::abs(exact.risk - mc_sampled.risk) <= 0.1 * exact.risk + 5.0 * (mc_sampled.bias_stderr + mc_sampled.variance_stderr));

  CHECK_THROWS_AS(monte_carlo_risk(ds, kernel, 1.0, 0, McTestMode::exhaustive()), std::invalid_argument);
}

TEST_CASE("expected training error: exact endpoints") {
  const int d = 12, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const Dataset ds = distinct_dataset(64, d, 2, 0.5, 31);

  CHECK(expected_training_error(fit(ds, kernel, 0.0), sp) == 0.0);

  // lambda -> infinity: the zero predictor's expected training error
  // sigma^2 + (1/n) sum f*(x_i)^2 = sigma^2 + 1
  const double huge = expected_training_error(fit(ds, kernel, 1e10), sp);
  CHECK(huge == doctest::Approx(ds.noise_variance + 1.0).epsilon(1e-5));

  // ratio to sigma^2 is non-decreasing in lambda
  double prev = -1.0;
  for (double exponent = -3.0; exponent <= 3.0; exponent += 0.25) {
    const double ratio =
        expected_training_error(fit(ds, kernel, std::pow(10.0, exponent)), sp) / ds.noise_variance;
    CHECK(ratio >= prev - 1e-12);
    prev = ratio;
  }
}

TEST_CASE("fixed-design bounds: structure and the f*-in-span gate") {
  const int d = 12, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const Dataset ds = distinct_dataset(80, d, 2, 0.5, 37);

  // m = 0 with lambda >= 1: the variance upper bound collapses to
  // Tr(S)/(r1^2 max{lambda,1}^2)
  const BoundsReport rep0 = fixed_design_bounds(ds, kernel, sp, 2.0, std::size_t{0});
  const Eigen::MatrixXd s_full = sq_gram(sp, ds.points);
  const double expected_hi = ds.noise_variance * s_full.trace() / (rep0.diag.r1 * rep0.diag.r1 * 4.0);
  CHECK(rep0.var_hi == doctest::Approx(expected_hi).epsilon(1e-10));
  CHECK(!rep0.fstar_in_span);  // m = 0 never contains f*
  CHECK(std::isnan(rep0.bias_lo));

  // auto m from select_truncation
  const BoundsReport rep = fixed_design_bounds(ds, kernel, sp, 1.0);
  CHECK(rep.m == select_truncation(sp, ds.size(), 1.0));
  CHECK(rep.bias_exact >= 0.0);
  CHECK(rep.var_exact >= 0.0);

  // variance sandwich whenever its preconditions hold
  if (rep.concentration_ok && rep.r1_positive) {
    CHECK(rep.var_lo <= rep.var_exact);
    CHECK(rep.var_exact <= rep.var_hi);
  }
}

TEST_CASE("fixed-design bounds: expert coefficient vector") {
  const int d = 12, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  // duplicates are fine at ridge > 0, so no collision-free scan needed
  const Dataset ds = make_dataset(600, d, 1, 0.5, 41);
  const std::size_t m = 13;

  // two-hot nonnegative a over the first m eigenfunctions
  Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  a(1) = 1.0;
  a(5) = 0.5;
  const BoundsReport rep = fixed_design_bounds(ds, kernel, sp, 1.0, m, a);
  CHECK(rep.fstar_in_span);
  if (rep.preconditions_ok) {
    CHECK(rep.bias_lo <= rep.bias_exact);
    CHECK(rep.bias_exact <= rep.bias_hi);
    CHECK(rep.var_lo <= rep.var_exact);
    CHECK(rep.var_exact <= rep.var_hi);
  }
  Eigen::VectorXd negative = a;
  negative(1) = -1.0;
  CHECK_THROWS_AS(fixed_design_bounds(ds, kernel, sp, 1.0, m, negative), std::invalid_argument);
}

TEST_CASE("RidgeSweep agrees with the factorization-based closed form") {
  const int d = 12, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const Dataset ds = distinct_dataset(64, d, 2, 0.5, 43);
  const Eigen::MatrixXd k = gram(kernel, ds.points);
  const Eigen::MatrixXd s = sq_gram(sp, ds.points);
  Eigen::VectorXd u(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    u(static_cast<Eigen::Index>(i)) = ds.ground_truth_value(ds.points[i]);
  const double lambda_star = conv_eigenvalue(sp.xi, d, 2, 2);
  const RidgeSweep sweep(k, s, u, lambda_star, ds.noise_variance);

  for (double lambda : {0.0, 0.01, 1.0, 50.0}) {
    const RidgeSweep::Point p = sweep.eval(lambda);
    const KrrModel model = fit(ds, kernel, lambda);
    const RiskReport exact = closed_form_risk(model, sp);
    CHECK(p.bias_sq == doctest::Approx(exact.bias_sq).epsilon(1e-8));
    CHECK(p.variance == doctest::Approx(exact.variance).epsilon(1e-8));
    CHECK(p.train_err == doctest::Approx(expected_training_error(model, sp)).epsilon(1e-8));
  }
}

TEST_CASE("RidgeSweep flags singular grams at ridge 0") {
  // more samples than eigenfunctions: q = 2 has 1 + 2d features
  const int d = 10, q = 2;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const Dataset ds = distinct_dataset(64, d, 2, 0.5, 47);
  REQUIRE(sp.size() < ds.size());
  const Eigen::MatrixXd k = gram(kernel, ds.points);
  const Eigen::MatrixXd s = sq_gram(sp, ds.points);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.size()));
  const RidgeSweep sweep(k, s, u, 0.0, ds.noise_variance);
  CHECK(sweep.gram_singular());
  CHECK_THROWS_AS(sweep.eval(0.0), SingularSystemError);
  CHECK_NOTHROW(sweep.eval(1e-3));
}
