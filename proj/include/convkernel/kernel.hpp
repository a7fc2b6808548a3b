#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "convkernel/hypercube.hpp"

namespace convkernel {

// Inner nonlinearity kappa: [-1,1] -> R of the convolutional kernel.
//   Exponential:      t -> exp(t)
//   GaussianRbf(h):   t -> exp((t-1)/h), a Gaussian kernel on +-1 patches
//   Polynomial(c):    t -> sum_i c_i t^i
class InnerFunction {
 public:
  enum class Kind { kExponential, kGaussianRbf, kPolynomial };

  static InnerFunction exponential();
  static InnerFunction gaussian_rbf(double bandwidth);
  static InnerFunction polynomial(std::vector<double> coeffs);
  static InnerFunction constant(double c) { return polynomial({c}); }

  // Config syntax: "exp" | "rbf:<h>" | "poly:c0,c1,...".
  static InnerFunction parse(const std::string& spec);

  double operator()(double t) const;
  Kind kind() const { return kind_; }
  std::string to_string() const;

 private:
  InnerFunction(Kind kind, double bandwidth, std::vector<double> coeffs)
      : kind_(kind), bandwidth_(bandwidth), coeffs_(std::move(coeffs)) {}
  Kind kind_;
  double bandwidth_ = 1.0;
  std::vector<double> coeffs_;
};

// Exact binomial coefficient; throws NumericOverflowError past n = 62
// (callers switch to log_binomial there).
std::int64_t binomial_exact(int n, int k);
double log_binomial(int n, int k);
// binom(n,k) as a double, exact for n <= 62, via lgamma beyond.
double binomial(int n, int k);

// Krawtchouk polynomial K_l(k; q) = sum_j (-1)^j binom(k,j) binom(q-k, l-j):
// the sum of Y_S(z) over |S| = l for z in {-1,+1}^q with k entries equal -1.
// Exact for q <= 62; three-term recurrence in doubles beyond.
double krawtchouk(int l, int k, int q);
std::int64_t krawtchouk_exact(int l, int k, int q);

// Coefficients xi_0..xi_q of the degree expansion of kappa(<x,x'>/q) over
// {-1,+1}^q: kappa((q-2k)/q) = sum_l xi_l K_l(k;q) / binom(q,l) for every k.
struct XiCoefficients {
  std::vector<double> values;  // size q+1
  int filter_size = 0;

  double sum() const;
  // max over the q+1 reconstruction nodes of the relative error.
  double max_reconstruction_error(const InnerFunction& inner) const;
};

XiCoefficients xi_coefficients(const InnerFunction& inner, int q);

// Cyclic convolutional kernel with filter size q on {-1,+1}^d:
// K(x,x') = (1/d) sum_k kappa(<x_(k,q), x'_(k,q)>/q), windows wrap.
struct ConvKernel {
  int dim = 0;          // d
  int filter_size = 0;  // q, 1 <= q <= d
  InnerFunction inner = InnerFunction::exponential();
};

double kernel_eval(const ConvKernel& kernel, const HypercubePoint& x, const HypercubePoint& y);

Eigen::MatrixXd gram(const ConvKernel& kernel, const PointList& points);

// Descriptive report of the Assumption-1 quantities for (kappa, q) at rate
// exponents (ell, beta). T = ceil(4 + 4*ell/beta). No pass/fail judgement:
// the assumption's constants are existential.
struct RegularityReport {
  int t = 0;                          // T
  double min_low_degree_xi = 0.0;     // min_{l <= min(T,q)} xi_l
  double min_all_xi = 0.0;            // min_l xi_l
  std::vector<double> tail_products;  // xi_{q-l} * q^{T-l+1}, l = 0..min(T,q)
  double xi_sum = 0.0;                // sum_l xi_l (= kappa(1) by reconstruction)
};

RegularityReport regularity_report(const InnerFunction& inner, int q, double ell, double beta);

// Flat binary Gram layout: two little-endian int64 (n, n), then row-major
// float64 entries. CSV alternative for small n.
std::string gram_to_binary(const Eigen::MatrixXd& m);
Eigen::MatrixXd gram_from_binary(const std::string& bytes);
std::string gram_to_csv(const Eigen::MatrixXd& m);

}  // namespace convkernel
