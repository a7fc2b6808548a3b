#pragma once

#include <string>
#include <vector>

namespace convkernel {

// Scaling exponents: n = Theta(d^ell), q = Theta(d^beta), sigma^2 = Theta(d^-ell_sigma),
// max{lambda,1} = Theta(d^ell_lambda), ground-truth degree L*.
struct RateParams {
  double ell = 2.0;
  double beta = 0.5;
  double ell_sigma = 0.0;
  double ell_lambda = 0.0;
  int l_star = 1;

  // Upper end of the admissible regularization-rate range.
  double ell_bar() const { return ell - 1.0 - beta * (l_star - 1); }
};

struct RateExponents {
  double delta = 0.0;      // frac((ell - ell_lambda - 1)/beta)
  double delta_bar = 0.0;  // frac((ell - 1)/beta)
  double eta_v = 0.0;
  double eta_b = 0.0;
  double eta = 0.0;  // max(eta_v, eta_b)
};

// Fractional parts with a 1e-12 guard band around integers (the floor makes
// delta discontinuous; values within the band snap to 0).
std::pair<double, double> fractional_parts(const RateParams& params);

// eta_v = (-ell_sigma - ell_lambda)/ell - (beta/ell) min{delta, 1-delta}
// eta_b = -2 - (2/ell)(-ell_lambda - 1 - beta(L*-1))
// Requires L* <= ceil((ell - ell_lambda - 1)/beta).
RateExponents rate_exponents(const RateParams& params);

// Raw exponent formulas at an explicit regularization rate (params.ell_lambda
// is ignored); no L* gating, used by the optimizers and their oracles.
double eta_v_value(const RateParams& params, double ell_lambda);
double eta_b_value(const RateParams& params, double ell_lambda);
double eta_value(const RateParams& params, double ell_lambda);

// The minimizer set of eta over ell_lambda in [0, ell_bar] is a closed
// interval [lo, hi]: hi is the (unique) intersection of the non-increasing
// eta_v with the strictly increasing eta_b found by bisection (1e-9), or 0
// when no sign change exists; lo extends left through eta_v's flat piece.
struct OptimalRegRate {
  double lo = 0.0;
  double hi = 0.0;
  double eta_min = 0.0;
};

OptimalRegRate optimal_reg_rate(const RateParams& params);

// All roots in (0,1) of eta_v(0;beta) - eta_b(0;beta): the filter-size
// exponents where the interpolator's bias and variance rates match. Grid
// scan (step 1e-4 by default) for sign changes, each bracket refined by
// bisection to 1e-9.
struct BetaStarScan {
  std::vector<double> roots;
  bool unique() const { return roots.size() == 1; }
};

BetaStarScan beta_star(double ell, double ell_sigma, int l_star, double grid_step = 1e-4);

enum class Regime { kHarmfulInterpolation, kHarmlessInterpolation, kBoundary };

std::string regime_name(Regime regime);

// Classification via the minimizer interval: harmful when it excludes 0,
// harmless when it is exactly {0}, boundary when 0 is a non-unique minimizer
// or when the bias and variance rates coincide exactly at ell_lambda = 0
// (i.e. beta sits on a beta* root).
Regime training_error_regime(const RateParams& params);

struct PhaseReport {
  BetaStarScan beta_stars;
  double ell = 0.0;
  double ell_sigma = 0.0;
  int l_star = 1;

  Regime regime_at(double beta) const;
};

PhaseReport phase_report(double ell, double ell_sigma, int l_star);

}  // namespace convkernel
