#include "convkernel/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "convkernel/errors.hpp"

namespace convkernel {

InnerFunction InnerFunction::exponential() { return InnerFunction(Kind::kExponential, 1.0, {}); }

InnerFunction InnerFunction::gaussian_rbf(double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("InnerFunction: rbf bandwidth must be > 0");
  return InnerFunction(Kind::kGaussianRbf, bandwidth, {});
}

InnerFunction InnerFunction::polynomial(std::vector<double> coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("InnerFunction: empty polynomial");
  return InnerFunction(Kind::kPolynomial, 1.0, std::move(coeffs));
}

InnerFunction InnerFunction::parse(const std::string& spec) {
  if (spec == "exp") return exponential();
  if (spec.rfind("rbf:", 0) == 0) return gaussian_rbf(std::stod(spec.substr(4)));
  if (spec.rfind("poly:", 0) == 0) {
    std::vector<double> coeffs;
    std::string rest = spec.substr(5);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      std::size_t next = rest.find(',', pos);
      if (next == std::string::npos) next = rest.size();
      coeffs.push_back(std::stod(rest.substr(pos, next - pos)));
      pos = next + 1;
    }
    return polynomial(std::move(coeffs));
  }
  throw std::invalid_argument("InnerFunction: cannot parse '" + spec + "'");
}

double InnerFunction::operator()(double t) const {
  switch (kind_) {
    case Kind::kExponential:
      return std::exp(t);
    case Kind::kGaussianRbf:
      return std::exp((t - 1.0) / bandwidth_);
    case Kind::kPolynomial: {
      double acc = 0.0;
      for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * t + *it;
      return acc;
    }
  }
  return 0.0;
}

std::string InnerFunction::to_string() const {
  char buf[64];
  switch (kind_) {
    case Kind::kExponential:
      return "exp";
    case Kind::kGaussianRbf:
      std::snprintf(buf, sizeof(buf), "rbf:%.17g", bandwidth_);
      return buf;
    case Kind::kPolynomial: {
      std::string out = "poly:";
      for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (i) out += ",";
        std::snprintf(buf, sizeof(buf), "%.17g", coeffs_[i]);
        out += buf;
      }
      return out;
    }
  }
  return "";
}

// ---------------------------------------------------------------------------

namespace {
constexpr int kExactBinomialLimit = 62;  // binom(62,31) < 2^63

const std::int64_t* pascal_row(int n) {
  // Triangle rows up to n = 62, built once.
  static const std::vector<std::int64_t> table = [] {
    std::vector<std::int64_t> t((kExactBinomialLimit + 1) * (kExactBinomialLimit + 2) / 2);
    auto at = [&t](int n, int k) -> std::int64_t& { return t[static_cast<std::size_t>(n * (n + 1) / 2 + k)]; };
    for (int n = 0; n <= kExactBinomialLimit; ++n) {
      at(n, 0) = 1;
      at(n, n) = 1;
      for (int k = 1; k < n; ++k) at(n, k) = at(n - 1, k - 1) + at(n - 1, k);
    }
    return t;
  }();
  return &table[static_cast<std::size_t>(n * (n + 1) / 2)];
}
}  // namespace

std::int64_t binomial_exact(int n, int k) {
  if (n < 0 || k < 0 || k > n) return 0;
  if (n > kExactBinomialLimit)
    throw NumericOverflowError("binomial_exact: n > 62 exceeds exact integer range");
  return pascal_row(n)[k];
}

double log_binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n) throw std::invalid_argument("log_binomial: invalid arguments");
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial(int n, int k) {
  if (n < 0 || k < 0 || k > n) return 0.0;
  if (n <= kExactBinomialLimit) return static_cast<double>(binomial_exact(n, k));
  return std::exp(log_binomial(n, k));
}

std::int64_t krawtchouk_exact(int l, int k, int q) {
  if (l < 0 || l > q || k < 0 || k > q) throw std::invalid_argument("krawtchouk: need 0 <= l,k <= q");
  if (q > kExactBinomialLimit) throw NumericOverflowError("krawtchouk_exact: q > 62");
  // |partial sums| <= sum_j binom(k,j) binom(q-k,l-j) = binom(q,l) < 2^63.
  std::int64_t acc = 0;
  const std::int64_t* rk = pascal_row(k);
  const std::int64_t* rq = pascal_row(q - k);
  for (int j = std::max(0, l - (q - k)); j <= std::min(l, k); ++j) {
    const std::int64_t term = rk[j] * rq[l - j];
    acc += (j & 1) ? -term : term;
  }
  return acc;
}

double krawtchouk(int l, int k, int q) {
  if (l < 0 || l > q || k < 0 || k > q) throw std::invalid_argument("krawtchouk: need 0 <= l,k <= q");
  if (q <= kExactBinomialLimit) return static_cast<double>(krawtchouk_exact(l, k, q));
  // (l+1) K_{l+1} = (q-2k) K_l - (q-l+1) K_{l-1}
  double prev = 1.0;
  if (l == 0) return prev;
  double cur = static_cast<double>(q - 2 * k);
  for (int ll = 1; ll < l; ++ll) {
    double next = ((q - 2.0 * k) * cur - (q - ll + 1.0) * prev) / (ll + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double XiCoefficients::sum() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

double XiCoefficients::max_reconstruction_error(const InnerFunction& inner) const {
  const int q = filter_size;
  double worst = 0.0;
  for (int k = 0; k <= q; ++k) {
    const double target = inner((q - 2.0 * k) / q);
    double recon = 0.0;
    for (int l = 0; l <= q; ++l) recon += values[static_cast<std::size_t>(l)] * krawtchouk(l, k, q) / binomial(q, l);
    const double scale = std::max(std::abs(target), 1.0);
    worst = std::max(worst, std::abs(recon - target) / scale);
  }
  return worst;
}

XiCoefficients xi_coefficients(const InnerFunction& inner, int q) {
  if (q < 1) throw std::invalid_argument("xi_coefficients: need q >= 1");
  XiCoefficients xi;
  xi.filter_size = q;
  xi.values.assign(static_cast<std::size_t>(q) + 1, 0.0);
  // Binomial weights 2^-q binom(q,k); exact integers for q <= 62, log-space
  // otherwise so nothing overflows.
  std::vector<double> weight(static_cast<std::size_t>(q) + 1);
  for (int k = 0; k <= q; ++k) {
    if (q <= kExactBinomialLimit)
      weight[static_cast<std::size_t>(k)] = std::ldexp(static_cast<double>(binomial_exact(q, k)), -q);
    else
      weight[static_cast<std::size_t>(k)] = std::exp(log_binomial(q, k) - q * std::log(2.0));
  }
  for (int l = 0; l <= q; ++l) {
    double acc = 0.0;
    for (int k = 0; k <= q; ++k)
      acc += weight[static_cast<std::size_t>(k)] * inner((q - 2.0 * k) / q) * krawtchouk(l, k, q);
    xi.values[static_cast<std::size_t>(l)] = acc;
  }
  return xi;
}

// ---------------------------------------------------------------------------

double kernel_eval(const ConvKernel& kernel, const HypercubePoint& x, const HypercubePoint& y) {
  const int d = kernel.dim;
  const int q = kernel.filter_size;
  if (x.dim() != d || y.dim() != d) throw std::invalid_argument("kernel_eval: dimension mismatch");
  if (q < 1 || q > d) throw std::invalid_argument("kernel_eval: need 1 <= q <= d");
  // Sliding cyclic window sums of z = x .* y.
  int s = 0;
  for (int i = 0; i < q; ++i) s += x.coords[static_cast<std::size_t>(i)] * y.coords[static_cast<std::size_t>(i)];
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    acc += kernel.inner(static_cast<double>(s) / q);
    const int out = x.coords[static_cast<std::size_t>(k)] * y.coords[static_cast<std::size_t>(k)];
    const int in_idx = (k + q) % d;
    const int in = x.coords[static_cast<std::size_t>(in_idx)] * y.coords[static_cast<std::size_t>(in_idx)];
    s += in - out;
  }
  return acc / d;
}

Eigen::MatrixXd gram(const ConvKernel& kernel, const PointList& points) {
  if (points.empty()) throw std::invalid_argument("gram: empty point list");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = kernel_eval(kernel, points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

RegularityReport regularity_report(const InnerFunction& inner, int q, double ell, double beta) {
  if (q < 1) throw std::invalid_argument("regularity_report: need q >= 1");
  if (!(ell > 0.0) || !(beta > 0.0) || !(beta < 1.0))
    throw std::invalid_argument("regularity_report: need ell > 0 and beta in (0,1)");
  RegularityReport rep;
  rep.t = static_cast<int>(std::ceil(4.0 + 4.0 * ell / beta - 1e-9));
  const XiCoefficients xi = xi_coefficients(inner, q);
  const int low = std::min(rep.t, q);
  rep.min_low_degree_xi = xi.values[0];
  for (int l = 0; l <= low; ++l) rep.min_low_degree_xi = std::min(rep.min_low_degree_xi, xi.values[static_cast<std::size_t>(l)]);
  rep.min_all_xi = *std::min_element(xi.values.begin(), xi.values.end());
  for (int l = 0; l <= low; ++l)
    rep.tail_products.push_back(xi.values[static_cast<std::size_t>(q - l)] *
                                std::pow(static_cast<double>(q), rep.t - l + 1.0));
  rep.xi_sum = xi.sum();
  return rep;
}

// ---------------------------------------------------------------------------

std::string gram_to_binary(const Eigen::MatrixXd& m) {
  const std::int64_t n = m.rows();
  std::string out;
  out.resize(16 + static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * 8);
  std::memcpy(out.data(), &n, 8);
  std::memcpy(out.data() + 8, &n, 8);
  char* p = out.data() + 16;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const double v = m(i, j);
      std::memcpy(p, &v, 8);
      p += 8;
    }
  return out;
}

Eigen::MatrixXd gram_from_binary(const std::string& bytes) {
  if (bytes.size() < 16) throw std::invalid_argument("gram_from_binary: truncated header");
  std::int64_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data(), 8);
  std::memcpy(&cols, bytes.data() + 8, 8);
  if (rows != cols || rows < 0 || bytes.size() != 16 + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 8)
    throw std::invalid_argument("gram_from_binary: size mismatch");
  Eigen::MatrixXd m(rows, cols);
  const char* p = bytes.data() + 16;
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) {
      double v;
      std::memcpy(&v, p, 8);
      p += 8;
      m(i, j) = v;
    }
  return m;
}

std::string gram_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ",";
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace convkernel
