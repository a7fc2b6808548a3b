#include "convkernel/spectrum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "convkernel/errors.hpp"

namespace convkernel {

double conv_eigenvalue(const XiCoefficients& xi, int d, int degree, int diameter) {
  const int q = xi.filter_size;
  if (degree == 0) return xi.values[0];  // w({}) = d cancels the 1/d
  const double w = static_cast<double>(q + 1 - diameter);
  return xi.values[static_cast<std::size_t>(degree)] * w / (d * binomial(q, degree));
}

double Spectrum::trace() const {
  double acc = 0.0;
  for (const auto& p : pairs) acc += p.eigenvalue;
  return acc;
}

std::optional<std::size_t> Spectrum::find(const IndexSet& s) const {
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].subset == s) return i;
  return std::nullopt;
}

Spectrum full_spectrum(int d, int q, const InnerFunction& inner, std::size_t pair_cap) {
  if (q < 1 || 2 * q >= d) throw std::invalid_argument("full_spectrum: need 1 <= q < d/2");
  // 1 + d * 2^(q-1) eigenpairs.
  const long double predicted = 1.0L + static_cast<long double>(d) * std::ldexp(1.0L, q - 1);
  if (predicted > static_cast<long double>(pair_cap))
    throw ResourceLimitError("full_spectrum: eigenpair count exceeds cap");

  Spectrum sp;
  sp.dim = d;
  sp.filter_size = q;
  sp.xi = xi_coefficients(inner, q);
  sp.pairs.reserve(static_cast<std::size_t>(predicted));
  for (int l = 0; l <= q; ++l) {
    for (auto& s : enumerate_local_subsets(l, q, d)) {
      const double lam = conv_eigenvalue(sp.xi, d, l, s.diameter());
      sp.pairs.push_back(EigenPair{std::move(s), lam});
    }
  }
  std::sort(sp.pairs.begin(), sp.pairs.end(), [](const EigenPair& a, const EigenPair& b) {
    if (a.eigenvalue != b.eigenvalue) return a.eigenvalue > b.eigenvalue;
    if (a.subset.size() != b.subset.size()) return a.subset.size() < b.subset.size();
    if (a.subset.diameter() != b.subset.diameter()) return a.subset.diameter() < b.subset.diameter();
    return a.subset < b.subset;
  });
  return sp;
}

std::vector<double> brute_force_spectrum(int d, int q, const InnerFunction& inner) {
  if (d > 12) throw ResourceLimitError("brute_force_spectrum: d > 12");
  if (q < 1 || q > d) throw std::invalid_argument("brute_force_spectrum: need 1 <= q <= d");
  const std::size_t n = std::size_t{1} << d;
  const PointList pts = all_hypercube_points(d);
  const ConvKernel kernel{d, q, inner};
  // K(u,v) depends only on the elementwise product u.*v, i.e. on u XOR v.
  std::vector<double> table(n);
  for (std::size_t u = 0; u < n; ++u) table[u] = kernel_eval(kernel, pts[0], pts[u]);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table[i ^ j] * scale;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  std::vector<double> out(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

std::size_t select_truncation(const Spectrum& spectrum, std::size_t n, double ridge) {
  if (spectrum.size() == 0) throw std::invalid_argument("select_truncation: empty spectrum");
  if (n < 1) throw std::invalid_argument("select_truncation: need n >= 1");
  if (ridge < 0.0) throw std::invalid_argument("select_truncation: need ridge >= 0");
  const double threshold = std::max(ridge, 1.0);
  std::size_t m = 0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (static_cast<double>(n) * spectrum.pairs[i].eigenvalue >= threshold) m = i + 1;
  }
  // Extend to the end of the degeneracy block so the truncation never splits
  // a shift orbit (ties are bit-identical by construction).
  while (m > 0 && m < spectrum.size() &&
         spectrum.pairs[m].eigenvalue == spectrum.pairs[m - 1].eigenvalue)
    ++m;
  return m;
}

FeatureBundle feature_bundle(const Spectrum& spectrum, const PointList& points, std::size_t m,
                             std::size_t entry_cap) {
  const std::size_t n = points.size();
  const std::size_t total = spectrum.size();
  if (m > total) throw std::invalid_argument("feature_bundle: m exceeds spectrum size");
  if (n == 0) throw std::invalid_argument("feature_bundle: empty point list");
  if (n * total > entry_cap) throw ResourceLimitError("feature_bundle: n x spectrum size exceeds memory cap");

  FeatureBundle b;
  b.m = m;
  b.n = n;
  b.lambda_m = m > 0 ? spectrum.pairs[m - 1].eigenvalue : 0.0;
  b.lambda_next = m < total ? spectrum.pairs[m].eigenvalue : 0.0;

  Eigen::MatrixXd p_full(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(total));
  for (std::size_t j = 0; j < total; ++j)
    for (std::size_t i = 0; i < n; ++i)
      p_full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(monomial_eval(spectrum.pairs[j].subset, points[i]));

  const auto mi = static_cast<Eigen::Index>(m);
  const auto hi = static_cast<Eigen::Index>(total - m);
  b.p_low = p_full.leftCols(mi);
  b.d_low.resize(mi);
  for (Eigen::Index j = 0; j < mi; ++j) b.d_low(j) = spectrum.pairs[static_cast<std::size_t>(j)].eigenvalue;
  Eigen::VectorXd d_high(hi);
  for (Eigen::Index j = 0; j < hi; ++j)
    d_high(j) = spectrum.pairs[m + static_cast<std::size_t>(j)].eigenvalue;

  const Eigen::MatrixXd p_high = p_full.rightCols(hi);
  b.gram_low = b.p_low * b.d_low.asDiagonal() * b.p_low.transpose();
  b.gram_high = p_high * d_high.asDiagonal() * p_high.transpose();
  b.sq_gram_high = p_high * d_high.array().square().matrix().asDiagonal() * p_high.transpose();
  return b;
}

DiagnosticsReport diagnostics(const FeatureBundle& bundle, double ridge) {
  if (ridge < 0.0) throw std::invalid_argument("diagnostics: need ridge >= 0");
  DiagnosticsReport rep;
  const double denom = std::max(ridge, 1.0);
  const double n = static_cast<double>(bundle.n);

  if (bundle.m > 0) {
    Eigen::MatrixXd c = bundle.p_low.transpose() * bundle.p_low / n;
    c -= Eigen::MatrixXd::Identity(c.rows(), c.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
    rep.concentration_norm =
        std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
    rep.tau1 = std::min(n * bundle.lambda_m / denom, 1.0);
  } else {
    rep.concentration_norm = 0.0;
    rep.tau1 = 1.0;
  }
  rep.tau2 = std::max(n * bundle.lambda_next / denom, 1.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_high(bundle.gram_high, Eigen::EigenvaluesOnly);
  const double mu_min = es_high.eigenvalues().minCoeff();
  const double mu_max = std::max(std::abs(es_high.eigenvalues().minCoeff()),
                                 std::abs(es_high.eigenvalues().maxCoeff()));
  rep.r1 = (mu_min + ridge) / denom;
  rep.r2 = (mu_max + ridge) / denom;
  rep.condition_ok = rep.concentration_norm <= 0.5 && rep.r1 > 0.0;
  return rep;
}

OneTwoSplit one_two_split(const Spectrum& spectrum, const PointList& points, std::size_t m,
                          double ell, double beta) {
  if (m > spectrum.size()) throw std::invalid_argument("one_two_split: m exceeds spectrum size");
  if (!(beta > 0.0)) throw std::invalid_argument("one_two_split: need beta > 0");
  OneTwoSplit split;
  split.l_bar = static_cast<int>(std::floor((ell - 1.0) / beta + 1e-12));
  const auto n = static_cast<Eigen::Index>(points.size());
  split.k1 = Eigen::MatrixXd::Zero(n, n);
  split.k2 = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const auto& pair = spectrum.pairs[i];
    const bool in_i2 = pair.subset.size() >= split.l_bar + 2;
    const bool in_i1 = i >= m && pair.subset.size() <= split.l_bar + 1;
    if (!in_i1 && !in_i2) continue;
    for (Eigen::Index r = 0; r < n; ++r)
      y(r) = static_cast<double>(monomial_eval(pair.subset, points[static_cast<std::size_t>(r)]));
    if (in_i1) {
      split.i1.push_back(i);
      split.k1.noalias() += pair.eigenvalue * y * y.transpose();
    } else {
      split.i2.push_back(i);
      split.k2.noalias() += pair.eigenvalue * y * y.transpose();
    }
  }
  split.m_bar = split.i2.empty() ? 0 : split.i2.front() + 1;
  // I1 u I2 = {i > m} iff every I2 index already lies past m.
  split.union_ok = split.i2.empty() || split.i2.front() >= m;
  return split;
}

// ---------------------------------------------------------------------------
// Entrywise evaluation over z = x .* y, grouping subsets by their minimal
// window [s, s+w-1]: such a subset contains both endpoints plus any l-2 of
// the w-2 interior coordinates, so the inner sums are elementary symmetric
// polynomials of the interior z values, built incrementally as w grows.
// ---------------------------------------------------------------------------

namespace {

template <typename WeightFn>
double window_sum(int d, int q, const HypercubePoint& x, const HypercubePoint& y, WeightFn weight,
                  double empty_term, double singleton_weight) {
  std::vector<double> z(static_cast<std::size_t>(d));
  double z_sum = 0.0;
  for (int i = 0; i < d; ++i) {
    z[static_cast<std::size_t>(i)] =
        static_cast<double>(x.coords[static_cast<std::size_t>(i)] * y.coords[static_cast<std::size_t>(i)]);
    z_sum += z[static_cast<std::size_t>(i)];
  }
  double acc = empty_term + singleton_weight * z_sum;
  if (q < 2) return acc;
  std::vector<double> e(static_cast<std::size_t>(q), 0.0);
  for (int s = 0; s < d; ++s) {
    e[0] = 1.0;
    int e_len = 1;  // e[0..e_len-1] = elementary symmetric of the interior
    for (int w = 2; w <= q; ++w) {
      if (w > 2) {
        const double zz = z[static_cast<std::size_t>((s + w - 2) % d)];
        e[static_cast<std::size_t>(e_len)] = zz * e[static_cast<std::size_t>(e_len - 1)];
        for (int k = e_len - 1; k >= 1; --k)
          e[static_cast<std::size_t>(k)] += zz * e[static_cast<std::size_t>(k - 1)];
        ++e_len;
      }
      const double endpoints =
          z[static_cast<std::size_t>(s)] * z[static_cast<std::size_t>((s + w - 1) % d)];
      double inner = 0.0;
      for (int l = 2; l <= w; ++l) inner += weight(l, w) * e[static_cast<std::size_t>(l - 2)];
      acc += endpoints * inner;
    }
  }
  return acc;
}

}  // namespace

double q_kernel_eval(int d, int q, int l, const HypercubePoint& x, const HypercubePoint& y) {
  if (l < 0 || l > q || q < 1 || 2 * q >= d)
    throw std::invalid_argument("q_kernel_eval: need 0 <= l <= q < d/2");
  if (x.dim() != d || y.dim() != d) throw std::invalid_argument("q_kernel_eval: dimension mismatch");
  if (l == 0) return 1.0;  // w({}) = d over d * binom(q,0)
  const double denom = d * binomial(q, l);
  if (l == 1) {
    double z_sum = 0.0;
    for (int i = 0; i < d; ++i)
      z_sum += x.coords[static_cast<std::size_t>(i)] * y.coords[static_cast<std::size_t>(i)];
    return z_sum * q / denom;
  }
  auto weight = [&](int ll, int w) -> double {
    return ll == l ? static_cast<double>(q + 1 - w) / denom : 0.0;
  };
  return window_sum(d, q, x, y, weight, 0.0, 0.0);
}

double sq_kernel_eval(int d, int q, const XiCoefficients& xi, const HypercubePoint& x,
                      const HypercubePoint& y) {
  if (q != xi.filter_size) throw std::invalid_argument("sq_kernel_eval: xi/q mismatch");
  if (2 * q >= d) throw std::invalid_argument("sq_kernel_eval: need q < d/2");
  if (x.dim() != d || y.dim() != d) throw std::invalid_argument("sq_kernel_eval: dimension mismatch");
  // lambda^2 weights per (degree, window size).
  std::vector<double> lam2(static_cast<std::size_t>((q + 1) * (q + 1)), 0.0);
  for (int l = 2; l <= q; ++l)
    for (int w = l; w <= q; ++w) {
      const double lam = conv_eigenvalue(xi, d, l, w);
      lam2[static_cast<std::size_t>(l * (q + 1) + w)] = lam * lam;
    }
  const double lam_empty = conv_eigenvalue(xi, d, 0, 0);
  const double lam_single = q >= 1 ? conv_eigenvalue(xi, d, 1, 1) : 0.0;
  auto weight = [&](int l, int w) { return lam2[static_cast<std::size_t>(l * (q + 1) + w)]; };
  return window_sum(d, q, x, y, weight, lam_empty * lam_empty, lam_single * lam_single);
}

Eigen::MatrixXd sq_gram(int d, int q, const XiCoefficients& xi, const PointList& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = sq_kernel_eval(d, q, xi, points[static_cast<std::size_t>(i)],
                                      points[static_cast<std::size_t>(j)]);
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

Eigen::MatrixXd sq_gram(const Spectrum& spectrum, const PointList& points) {
  return sq_gram(spectrum.dim, spectrum.filter_size, spectrum.xi, points);
}

double expansion_eval(const Spectrum& spectrum, const HypercubePoint& x, const HypercubePoint& y) {
  double acc = 0.0;
  for (const auto& p : spectrum.pairs)
    acc += p.eigenvalue * monomial_eval(p.subset, x) * monomial_eval(p.subset, y);
  return acc;
}

}  // namespace convkernel
