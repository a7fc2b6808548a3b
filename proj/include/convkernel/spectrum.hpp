#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "convkernel/kernel.hpp"

namespace convkernel {

// One eigenpair of the cyclic convolutional kernel: the parity monomial Y_S
// and its eigenvalue
//   lambda_S = xi_{|S|} * w(S) / (d * binom(q, |S|)),
// where w(S) = q + 1 - gamma(S) counts the cyclic windows containing S for
// S != {}, and w({}) = d (every window contains the empty set, which is what
// the trace identity sum_S lambda_S = kappa(1) and the 2^d operator oracle
// require).
struct EigenPair {
  IndexSet subset;
  double eigenvalue;
};

double conv_eigenvalue(const XiCoefficients& xi, int d, int degree, int diameter);

// The complete eigensystem: all S with gamma(S) <= q, sorted by
// (lambda desc, |S| asc, gamma asc, lexicographic members asc).
// Count = 1 + d * 2^(q-1) for q < d/2.
struct Spectrum {
  int dim = 0;
  int filter_size = 0;
  XiCoefficients xi;
  std::vector<EigenPair> pairs;

  std::size_t size() const { return pairs.size(); }
  double trace() const;
  // Sorted position (0-based) of a subset, if present.
  std::optional<std::size_t> find(const IndexSet& s) const;
};

Spectrum full_spectrum(int d, int q, const InnerFunction& inner,
                       std::size_t pair_cap = 10'000'000);

// Oracle: eigenvalues (descending, all 2^d of them) of the operator matrix
// (1/2^d)[K(u,v)] over the full hypercube. d <= 12.
std::vector<double> brute_force_spectrum(int d, int q, const InnerFunction& inner);

// Largest index m (1-based count) with n*lambda_m >= max{ridge, 1}, extended
// to the end of its eigenvalue-degeneracy block; 0 if none qualifies.
std::size_t select_truncation(const Spectrum& spectrum, std::size_t n, double ridge);

// Truncated feature matrices at a split index m:
//   P_low (n x m, entries +-1), D_low = top-m eigenvalues,
//   K_{<=m} = P_low D_low P_low^T, K_{>m} = P_high D_high P_high^T,
//   S_{>m} = P_high D_high^2 P_high^T (exact finite expansion, no sampling).
struct FeatureBundle {
  std::size_t m = 0;
  std::size_t n = 0;
  Eigen::MatrixXd p_low;         // n x m
  Eigen::VectorXd d_low;         // m
  Eigen::MatrixXd gram_low;      // K_{<=m}
  Eigen::MatrixXd gram_high;     // K_{>m}
  Eigen::MatrixXd sq_gram_high;  // S_{>m}
  double lambda_m = 0.0;         // lambda at index m (0 if m = 0)
  double lambda_next = 0.0;      // lambda at index m+1 (0 if m = size)
};

FeatureBundle feature_bundle(const Spectrum& spectrum, const PointList& points, std::size_t m,
                             std::size_t entry_cap = 50'000'000);

// Tail-spectrum and truncation diagnostics at a given ridge level:
//   tau1 = min{n lambda_m / max{ridge,1}, 1}   (1 when m = 0)
//   tau2 = max{n lambda_{m+1} / max{ridge,1}, 1}
//   r1 = (mu_min(K_{>m}) + ridge) / max{ridge,1}
//   r2 = (||K_{>m}|| + ridge) / max{ridge,1}
// plus the feature concentration norm ||P_low^T P_low / n - I_m||.
struct DiagnosticsReport {
  double concentration_norm = 0.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  double r1 = 0.0;
  double r2 = 0.0;
  bool condition_ok = false;  // concentration <= 1/2 and r1 > 0
};

DiagnosticsReport diagnostics(const FeatureBundle& bundle, double ridge);

// Degree split of the tail: with Lbar = floor((ell-1)/beta),
//   I1 = {i > m : |S_i| <= Lbar+1},  I2 = {i : |S_i| >= Lbar+2}.
// K1 + K2 = K_{>m} exactly when I2 lies entirely past m (union_ok).
struct OneTwoSplit {
  std::vector<std::size_t> i1;  // 0-based spectrum indices
  std::vector<std::size_t> i2;
  Eigen::MatrixXd k1;
  Eigen::MatrixXd k2;
  int l_bar = 0;
  std::size_t m_bar = 0;  // 1-based min of I2; 0 if I2 empty
  bool union_ok = false;  // I1 u I2 == {i > m}
};

OneTwoSplit one_two_split(const Spectrum& spectrum, const PointList& points, std::size_t m,
                          double ell, double beta);

// Q_l kernel: sum over |S| = l, gamma(S) <= q of w(S)/(d binom(q,l)) Y_S(x)Y_S(x'),
// with the same w convention as conv_eigenvalue. Q_l(x,x) = 1 for all l <= q.
double q_kernel_eval(int d, int q, int l, const HypercubePoint& x, const HypercubePoint& y);

// Squared kernel S(x,x') = sum_S lambda_S^2 Y_S(x)Y_S(x'), evaluated exactly
// in O(d q^2) per pair without materializing the feature matrix.
double sq_kernel_eval(int d, int q, const XiCoefficients& xi, const HypercubePoint& x,
                      const HypercubePoint& y);

Eigen::MatrixXd sq_gram(const Spectrum& spectrum, const PointList& points);
Eigen::MatrixXd sq_gram(int d, int q, const XiCoefficients& xi, const PointList& points);

// Kernel value via the eigen-expansion (test oracle for kernel_eval).
double expansion_eval(const Spectrum& spectrum, const HypercubePoint& x, const HypercubePoint& y);

}  // namespace convkernel
