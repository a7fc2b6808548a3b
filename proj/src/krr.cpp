#include "convkernel/krr.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "convkernel/errors.hpp"

namespace convkernel {

namespace {

double condition_estimate(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().cwiseAbs().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd checked_solve(const Eigen::LDLT<Eigen::MatrixXd>& factor, const Eigen::MatrixXd& h,
                              const Eigen::VectorXd& rhs, double* residual_out) {
  Eigen::VectorXd x = factor.solve(rhs);
  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  double residual = (h * x - rhs).norm() / rhs_norm;
  // Iterative refinement: brings solvable but ill-conditioned systems down to
  // working precision; a genuinely singular H stays above the threshold.
  for (int step = 0; step < 3 && std::isfinite(residual) && residual > 1e-12; ++step) {
    x += factor.solve(rhs - h * x);
    residual = (h * x - rhs).norm() / rhs_norm;
  }
  if (residual_out) *residual_out = residual;
  if (!std::isfinite(residual) || residual > 1e-8)
    throw SingularSystemError("krr: dual solve residual above 1e-8", condition_estimate(h));
  return x;
}

Eigen::VectorXd ground_truth_vector(const Dataset& ds) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    f(static_cast<Eigen::Index>(i)) = ds.ground_truth_value(ds.points[i]);
  return f;
}

// lambda_{S*} when f* = Y_{1..L*} belongs to the kernel's eigenfunctions,
// else 0 (its projection onto the expansion vanishes).
double lambda_star_of(const Spectrum& spectrum, const Dataset& ds) {
  const int l_star = ds.ground_truth_degree;
  if (l_star > spectrum.filter_size) return 0.0;
  return conv_eigenvalue(spectrum.xi, spectrum.dim, l_star, l_star);
}

struct ExactRisk {
  double bias_sq;
  double variance;
};

// Shared closed-form core. u = P a (training values of f*), v = P D a,
// a_sq = a'a. Works in the gram eigenbasis so near-singular H at small ridge
// stays well-behaved; a numerically rank-deficient gram at ridge 0 errors.
ExactRisk exact_bias_variance(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& sq,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& v, double a_sq,
                              double sigma2, double ridge) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const Eigen::VectorXd& w = es.eigenvalues();
  const double max_eig = w.cwiseAbs().maxCoeff();
  if (ridge == 0.0 &&
      w.minCoeff() <= static_cast<double>(gram.rows()) * std::numeric_limits<double>::epsilon() * max_eig)
    throw SingularSystemError("closed-form risk: gram numerically singular at ridge 0",
                              max_eig / std::max(std::abs(w.minCoeff()), 1e-300));
  const Eigen::ArrayXd inv = 1.0 / (w.array() + ridge);
  const Eigen::VectorXd ut = es.eigenvectors().transpose() * u;
  const Eigen::VectorXd vt = es.eigenvectors().transpose() * v;
  const Eigen::MatrixXd st = es.eigenvectors().transpose() * sq * es.eigenvectors();
  const Eigen::VectorXd hu = (inv * ut.array()).matrix();
  ExactRisk out;
  out.bias_sq = std::max(0.0, a_sq - 2.0 * vt.dot(hu) + hu.dot(st * hu));
  out.variance = std::max(0.0, sigma2 * (st.diagonal().array() * inv * inv).sum());
  return out;
}

}  // namespace

KrrModel fit(const Dataset& dataset, const ConvKernel& kernel, double ridge) {
  if (ridge < 0.0) throw std::invalid_argument("fit: need ridge >= 0");
  if (dataset.size() == 0) throw std::invalid_argument("fit: empty dataset");
  KrrModel model;
  model.dataset = dataset;
  model.kernel = kernel;
  model.ridge = ridge;
  model.gram = gram(kernel, dataset.points);
  Eigen::MatrixXd h = model.gram;
  h.diagonal().array() += ridge;
  Eigen::Map<const Eigen::VectorXd> y(dataset.labels.data(), static_cast<Eigen::Index>(dataset.labels.size()));
  Eigen::LDLT<Eigen::MatrixXd> factor(h);
  model.dual_coeffs = checked_solve(factor, h, y, &model.solver_residual);
  return model;
}

double predict(const KrrModel& model, const HypercubePoint& x) {
  if (x.dim() != model.kernel.dim) throw std::invalid_argument("predict: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < model.dataset.size(); ++i)
    acc += model.dual_coeffs(static_cast<Eigen::Index>(i)) *
           kernel_eval(model.kernel, model.dataset.points[i], x);
  return acc;
}

RiskReport closed_form_risk(const KrrModel& model, const Spectrum& spectrum) {
  const Dataset& ds = model.dataset;
  if (spectrum.dim != model.kernel.dim || spectrum.filter_size != model.kernel.filter_size)
    throw std::invalid_argument("closed_form_risk: spectrum/kernel mismatch");
  const Eigen::MatrixXd sq = sq_gram(spectrum, ds.points);
  const Eigen::VectorXd u = ground_truth_vector(ds);
  const double lambda_star = lambda_star_of(spectrum, ds);
  const ExactRisk er =
      exact_bias_variance(model.gram, sq, u, lambda_star * u, 1.0, ds.noise_variance, model.ridge);
  RiskReport rep;
  rep.bias_sq = er.bias_sq;
  rep.variance = er.variance;
  rep.risk = er.bias_sq + er.variance;
  rep.method = RiskReport::Method::kClosedForm;
  return rep;
}

RiskReport monte_carlo_risk(const Dataset& dataset, const ConvKernel& kernel, double ridge,
                            std::size_t noise_draws, const McTestMode& test_mode) {
  if (noise_draws < 1) throw std::invalid_argument("monte_carlo_risk: need >= 1 draw");
  const std::size_t n = dataset.size();
  const int d = kernel.dim;

  PointList test_points;
  if (test_mode.kind == McTestMode::Kind::kExhaustive) {
    if (d > 14) throw ResourceLimitError("monte_carlo_risk: exhaustive test mode needs d <= 14");
    test_points = all_hypercube_points(d);
  } else {
    if (test_mode.sample_count < 1) throw std::invalid_argument("monte_carlo_risk: empty test sample");
    test_points = sample_points(test_mode.sample_count, d, test_mode.sample_seed);
  }
  const std::size_t n_test = test_points.size();

  Eigen::MatrixXd h = gram(kernel, dataset.points);
  h.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> factor(h);

  Eigen::MatrixXd k_test(static_cast<Eigen::Index>(n_test), static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n_test; ++t)
    for (std::size_t i = 0; i < n; ++i)
      k_test(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          kernel_eval(kernel, dataset.points[i], test_points[t]);

  Eigen::VectorXd f = ground_truth_vector(dataset);
  Eigen::VectorXd f_test(static_cast<Eigen::Index>(n_test));
  for (std::size_t t = 0; t < n_test; ++t)
    f_test(static_cast<Eigen::Index>(t)) = dataset.ground_truth_value(test_points[t]);

  const double sigma = std::sqrt(dataset.noise_variance);
  const std::uint64_t mc_base = derive_stream_seed(dataset.seed, 2);

  const std::size_t n_batches = std::min<std::size_t>(20, noise_draws);
  std::vector<double> batch_bias(n_batches), batch_var(n_batches);
  std::size_t draw_index = 0;
  bool solve_checked = false;
  bool degenerate = false;
  for (std::size_t b = 0; b < n_batches; ++b) {
    const std::size_t t_b = noise_draws / n_batches + (b < noise_draws % n_batches ? 1 : 0);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_test));
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_test));
    for (std::size_t t = 0; t < t_b; ++t, ++draw_index) {
      Eigen::VectorXd y = f;
      if (sigma > 0.0) {
        GaussianSampler noise(derive_stream_seed(mc_base, draw_index));
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sigma * noise.next();
      }
      Eigen::VectorXd alpha = factor.solve(y);
      if (!solve_checked) {
        const double res = (h * alpha - y).norm() / std::max(y.norm(), 1e-300);
        if (!std::isfinite(res) || res > 1e-8)
          throw SingularSystemError("monte_carlo_risk: dual solve residual above 1e-8",
                                    condition_estimate(h));
        solve_checked = true;
      }
      Eigen::VectorXd pred = k_test * alpha;
      sum += pred;
      sum_sq += pred.cwiseProduct(pred);
    }
    const double tb = static_cast<double>(t_b);
    Eigen::VectorXd mean = sum / tb;
    double var_mean = 0.0;
    if (t_b < 2) {
      degenerate = true;
    } else if (sigma > 0.0) {  // all draws identical at sigma = 0: variance exactly 0
      Eigen::VectorXd var = (sum_sq - tb * mean.cwiseProduct(mean)) / (tb - 1.0);
      var_mean = var.cwiseMax(0.0).mean();
    }
    const double sq_err = (mean - f_test).squaredNorm() / static_cast<double>(n_test);
    batch_bias[b] = t_b >= 2 ? sq_err - var_mean / tb : sq_err;
    batch_var[b] = var_mean;
  }

  auto mean_stderr = [&](const std::vector<double>& vals) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    if (vals.size() < 2) return std::pair<double, double>{mean, 0.0};
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (static_cast<double>(vals.size()) - 1.0));
    return std::pair<double, double>{mean, sd / std::sqrt(static_cast<double>(vals.size()))};
  };

  RiskReport rep;
  rep.method = RiskReport::Method::kMonteCarlo;
  auto [bias, bias_se] = mean_stderr(batch_bias);
  auto [var, var_se] = mean_stderr(batch_var);
  rep.bias_sq = bias;
  rep.variance = var;
  rep.risk = bias + var;
  rep.bias_stderr = bias_se;
  rep.variance_stderr = var_se;
  rep.degenerate = degenerate || noise_draws < 2;
  return rep;
}

double expected_training_error(const KrrModel& model, const Spectrum& spectrum) {
  (void)spectrum;
  const double ridge = model.ridge;
  if (ridge == 0.0) return 0.0;
  const Eigen::Index n = model.gram.rows();
  Eigen::MatrixXd h = model.gram;
  h.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> factor(h);
  Eigen::MatrixXd g = factor.solve(Eigen::MatrixXd::Identity(n, n));
  const double solve_err = (h * g - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!std::isfinite(solve_err) || solve_err > 1e-6)
    throw SingularSystemError("expected_training_error: inverse residual too large",
                              condition_estimate(h));
  const Eigen::VectorXd f = ground_truth_vector(model.dataset);
  const double tr_h2 = g.squaredNorm();
  const double f_term = (g * f).squaredNorm();
  return ridge * ridge / static_cast<double>(n) *
         (model.dataset.noise_variance * tr_h2 + f_term);
}

namespace {

BoundsReport bounds_impl(const Dataset& dataset, const ConvKernel& kernel, const Spectrum& spectrum,
                         double ridge, std::size_t m, const Eigen::VectorXd* expert_a) {
  if (ridge < 0.0) throw std::invalid_argument("fixed_design_bounds: need ridge >= 0");
  const std::size_t n = dataset.size();
  BoundsReport rep;
  rep.m = m;
  const FeatureBundle bundle = feature_bundle(spectrum, dataset.points, m);
  rep.diag = diagnostics(bundle, ridge);
  rep.concentration_ok = rep.diag.concentration_norm <= 0.5;
  rep.r1_positive = rep.diag.r1 > 0.0;

  const double max_l = std::max(ridge, 1.0);
  const double sigma2 = dataset.noise_variance;
  const double r1 = rep.diag.r1, r2 = rep.diag.r2, tau1 = rep.diag.tau1, tau2 = rep.diag.tau2;
  const double nn = static_cast<double>(n);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Spectrum tail of S_{>m}: sum of its (m+1)-th..n-th eigenvalues (desc).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bundle.sq_gram_high, Eigen::EigenvaluesOnly);
  double tail_sum = 0.0;
  const Eigen::Index top = std::min<Eigen::Index>(static_cast<Eigen::Index>(m), es.eigenvalues().size());
  for (Eigen::Index i = 0; i < es.eigenvalues().size() - top; ++i) tail_sum += es.eigenvalues()(i);  // ascending: skip top m
  tail_sum = std::max(0.0, tail_sum);
  const double trace_high = bundle.sq_gram_high.trace();

  if (rep.r1_positive) {
    rep.var_lo = sigma2 * (r1 * r1 * tau1 * tau1 / (2.0 * r2 * r2 * (1.5 + r1) * (1.5 + r1)) * (static_cast<double>(m) / nn) +
                           tail_sum / (r2 * r2 * max_l * max_l));
    rep.var_hi = sigma2 * (6.0 * (r2 / r1) * (r2 / r1) * (static_cast<double>(m) / nn) +
                           trace_high / (r1 * r1 * max_l * max_l));
  } else {
    rep.var_lo = nan;
    rep.var_hi = nan;
  }

  // Coefficient vector over the first m eigenfunctions.
  double d_inv_a_sq = nan;
  Eigen::VectorXd u, v;
  double a_sq = 1.0;
  if (expert_a) {
    if (static_cast<std::size_t>(expert_a->size()) != m)
      throw std::invalid_argument("fixed_design_bounds: expert a must have size m");
    if ((expert_a->array() < 0.0).any())
      throw std::invalid_argument("fixed_design_bounds: expert a must be nonnegative");
    rep.fstar_in_span = true;
    d_inv_a_sq = (expert_a->array() / bundle.d_low.array()).square().sum();
    u = bundle.p_low * (*expert_a);
    v = bundle.p_low * bundle.d_low.asDiagonal() * (*expert_a);
    a_sq = expert_a->squaredNorm();
  } else {
    const auto pos = spectrum.find(dataset.ground_truth_set());
    rep.fstar_in_span = pos.has_value() && *pos < m;
    u.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      u(static_cast<Eigen::Index>(i)) = dataset.ground_truth_value(dataset.points[i]);
    const double lambda_star = lambda_star_of(spectrum, dataset);
    v = lambda_star * u;
    if (rep.fstar_in_span) d_inv_a_sq = 1.0 / (lambda_star * lambda_star);
  }

  if (rep.fstar_in_span && rep.r1_positive) {
    rep.bias_lo = (r1 / (1.5 + r1)) * (r1 / (1.5 + r1)) * tau1 * tau1 * max_l * max_l * d_inv_a_sq / (nn * nn);
    rep.bias_hi = 4.0 * (r2 * r2 + 1.5 * r2 * r2 * r2 / (r1 * r1)) * tau2 * max_l * max_l * d_inv_a_sq / (nn * nn);
  } else {
    rep.bias_lo = nan;
    rep.bias_hi = nan;
  }

  const Eigen::MatrixXd k = gram(kernel, dataset.points);
  const Eigen::MatrixXd sq = sq_gram(spectrum, dataset.points);
  const ExactRisk er = exact_bias_variance(k, sq, u, v, a_sq, sigma2, ridge);
  rep.bias_exact = er.bias_sq;
  rep.var_exact = er.variance;
  rep.preconditions_ok = rep.concentration_ok && rep.r1_positive && rep.fstar_in_span;
  return rep;
}

}  // namespace

BoundsReport fixed_design_bounds(const Dataset& dataset, const ConvKernel& kernel,
                                 const Spectrum& spectrum, double ridge,
                                 std::optional<std::size_t> m) {
  const std::size_t mm = m ? *m : select_truncation(spectrum, dataset.size(), ridge);
  return bounds_impl(dataset, kernel, spectrum, ridge, mm, nullptr);
}

BoundsReport fixed_design_bounds(const Dataset& dataset, const ConvKernel& kernel,
                                 const Spectrum& spectrum, double ridge, std::size_t m,
                                 const Eigen::VectorXd& expert_a) {
  return bounds_impl(dataset, kernel, spectrum, ridge, m, &expert_a);
}

// ---------------------------------------------------------------------------

RidgeSweep::RidgeSweep(const Eigen::MatrixXd& gram_matrix, const Eigen::MatrixXd& sq_gram_matrix,
                       const Eigen::VectorXd& fstar_values, double lambda_star, double sigma2)
    : lambda_star_(lambda_star), sigma2_(sigma2), n_(static_cast<double>(gram_matrix.rows())) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_matrix);
  evals_ = es.eigenvalues();
  s_rotated_ = es.eigenvectors().transpose() * sq_gram_matrix * es.eigenvectors();
  s_rotated_diag_ = s_rotated_.diagonal();
  u_rotated_ = es.eigenvectors().transpose() * fstar_values;
  const double max_eig = evals_.cwiseAbs().maxCoeff();
  singular_ = evals_.minCoeff() <= n_ * std::numeric_limits<double>::epsilon() * max_eig;
}

RidgeSweep::Point RidgeSweep::eval(double ridge) const {
  if (ridge < 0.0) throw std::invalid_argument("RidgeSweep: need ridge >= 0");
  if (ridge == 0.0 && singular_)
    throw SingularSystemError("RidgeSweep: gram matrix numerically singular at ridge 0",
                              evals_.cwiseAbs().maxCoeff() / std::max(std::abs(evals_.minCoeff()), 1e-300));
  const Eigen::ArrayXd inv = 1.0 / (evals_.array() + ridge);
  const Eigen::VectorXd hu = (inv * u_rotated_.array()).matrix();
  Point p;
  p.bias_sq = std::max(0.0, 1.0 - 2.0 * lambda_star_ * u_rotated_.dot(hu) + hu.dot(s_rotated_ * hu));
  p.variance = std::max(0.0, sigma2_ * (s_rotated_diag_.array() * inv * inv).sum());
  p.risk = p.bias_sq + p.variance;
  p.train_err = ridge == 0.0 ? 0.0
                             : ridge * ridge / n_ *
                                   (sigma2_ * (inv * inv).sum() +
                                    (u_rotated_.array() * u_rotated_.array() * inv * inv).sum());
  return p;
}

}  // namespace convkernel
