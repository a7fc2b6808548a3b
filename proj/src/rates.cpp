#include "convkernel/rates.hpp"

#include <cmath>
#include <tuple>
#include <stdexcept>

namespace convkernel {

namespace {

constexpr double kGuard = 1e-12;
constexpr double kBisectTol = 1e-9;

double guarded_frac(double t) {
  double r = t - std::floor(t);
  if (r < kGuard || r > 1.0 - kGuard) return 0.0;
  return r;
}

double guarded_ceil(double t) { return std::ceil(t - kGuard); }

void validate(const RateParams& p) {
  if (!(p.ell > 0.0)) throw std::invalid_argument("rates: need ell > 0");
  if (!(p.beta > 0.0) || !(p.beta < 1.0)) throw std::invalid_argument("rates: need beta in (0,1)");
  if (p.l_star < 1) throw std::invalid_argument("rates: need L* >= 1");
  if (p.ell_lambda < 0.0) throw std::invalid_argument("rates: need ell_lambda >= 0");
}

double eta_v_at(const RateParams& p, double ell_lambda) {
  const double delta = guarded_frac((p.ell - ell_lambda - 1.0) / p.beta);
  return (-p.ell_sigma - ell_lambda) / p.ell - (p.beta / p.ell) * std::min(delta, 1.0 - delta);
}

double eta_b_at(const RateParams& p, double ell_lambda) {
  return -2.0 - (2.0 / p.ell) * (-ell_lambda - 1.0 - p.beta * (p.l_star - 1));
}

}  // namespace

double eta_v_value(const RateParams& params, double ell_lambda) { return eta_v_at(params, ell_lambda); }
double eta_b_value(const RateParams& params, double ell_lambda) { return eta_b_at(params, ell_lambda); }
double eta_value(const RateParams& params, double ell_lambda) {
  return std::max(eta_v_at(params, ell_lambda), eta_b_at(params, ell_lambda));
}

std::pair<double, double> fractional_parts(const RateParams& params) {
  validate(params);
  const double delta = guarded_frac((params.ell - params.ell_lambda - 1.0) / params.beta);
  const double delta_bar = guarded_frac((params.ell - 1.0) / params.beta);
  return {delta, delta_bar};
}

RateExponents rate_exponents(const RateParams& params) {
  validate(params);
  const double cap = guarded_ceil((params.ell - params.ell_lambda - 1.0) / params.beta);
  if (static_cast<double>(params.l_star) > cap)
    throw std::invalid_argument("rate_exponents: L* exceeds ceil((ell-ell_lambda-1)/beta)");
  RateExponents out;
  std::tie(out.delta, out.delta_bar) = fractional_parts(params);
  out.eta_v = eta_v_at(params, params.ell_lambda);
  out.eta_b = eta_b_at(params, params.ell_lambda);
  out.eta = std::max(out.eta_v, out.eta_b);
  return out;
}

OptimalRegRate optimal_reg_rate(const RateParams& params) {
  validate(params);
  const double ell_bar = params.ell_bar();
  if (ell_bar < -kGuard) throw std::invalid_argument("optimal_reg_rate: need ell_bar >= 0");
  const double hi_end = std::max(0.0, ell_bar);
  auto g = [&](double x) { return eta_v_at(params, x) - eta_b_at(params, x); };

  OptimalRegRate out;
  if (g(0.0) <= 0.0 || g(hi_end) > 0.0) {
    // Bias already dominates at 0, or no sign change on the interval: the
    // strictly increasing eta_b pins the minimum at 0.
    out.lo = out.hi = 0.0;
    out.eta_min = std::max(eta_v_at(params, 0.0), eta_b_at(params, 0.0));
    return out;
  }
  // g is continuous with g(0) > 0 >= g(hi_end); eta_v non-increasing and
  // eta_b strictly increasing make the crossing unique.
  double lo = 0.0, hi = hi_end;
  while (hi - lo > kBisectTol) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double root = 0.5 * (lo + hi);
  out.hi = root;
  out.eta_min = std::max(eta_v_at(params, root), eta_b_at(params, root));

  // Extend left through eta_v's flat piece: smallest x with eta_v(x) at the
  // minimum level (eta_v is non-increasing, so the predicate is monotone).
  const double level = out.eta_min + 1e-12;
  if (eta_v_at(params, 0.0) <= level) {
    out.lo = 0.0;
  } else {
    double a = 0.0, b = root;
    while (b - a > kBisectTol) {
      const double mid = 0.5 * (a + b);
      if (eta_v_at(params, mid) <= level)
        b = mid;
      else
        a = mid;
    }
    out.lo = 0.5 * (a + b);
  }
  return out;
}

BetaStarScan beta_star(double ell, double ell_sigma, int l_star, double grid_step) {
  if (!(grid_step > 0.0) || grid_step >= 0.5) throw std::invalid_argument("beta_star: bad grid step");
  auto g = [&](double beta) {
    RateParams p{ell, beta, ell_sigma, 0.0, l_star};
    validate(p);
    const double cap = guarded_ceil((ell - 1.0) / beta);
    if (static_cast<double>(l_star) > cap)
      throw std::invalid_argument("beta_star: L* invalid at scanned beta");
    return eta_v_at(p, 0.0) - eta_b_at(p, 0.0);
  };
  BetaStarScan scan;
  double prev_beta = grid_step;
  double prev_g = g(prev_beta);
  for (double beta = 2.0 * grid_step; beta < 1.0 - 0.5 * grid_step; beta += grid_step) {
    const double cur_g = g(beta);
    if (prev_g == 0.0) {
      scan.roots.push_back(prev_beta);
    } else if (prev_g * cur_g < 0.0) {
      double a = prev_beta, b = beta, ga = prev_g;
      while (b - a > kBisectTol) {
        const double mid = 0.5 * (a + b);
        const double gm = g(mid);
        if ((ga > 0.0) == (gm > 0.0))
          a = mid;
        else
          b = mid;
      }
      scan.roots.push_back(0.5 * (a + b));
    }
    prev_beta = beta;
    prev_g = cur_g;
  }
  if (prev_g == 0.0) scan.roots.push_back(prev_beta);
  return scan;
}

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kHarmfulInterpolation:
      return "harmful_interpolation";
    case Regime::kHarmlessInterpolation:
      return "harmless_interpolation";
    case Regime::kBoundary:
      return "boundary";
  }
  return "";
}

Regime training_error_regime(const RateParams& params) {
  validate(params);
  // |g| <= 1e-8 is the root-finding contract of beta_star: such a beta sits
  // on the bias/variance-rate crossing, the transition point itself.
  const double g0 = eta_v_at(params, 0.0) - eta_b_at(params, 0.0);
  if (std::abs(g0) <= 1e-8) return Regime::kBoundary;
  const OptimalRegRate opt = optimal_reg_rate(params);
  if (opt.lo > kBisectTol) return Regime::kHarmfulInterpolation;
  if (opt.hi <= kBisectTol) return Regime::kHarmlessInterpolation;
  return Regime::kBoundary;  // 0 is a non-unique minimizer
}

Regime PhaseReport::regime_at(double beta) const {
  RateParams p{ell, beta, ell_sigma, 0.0, l_star};
  return training_error_regime(p);
}

PhaseReport phase_report(double ell, double ell_sigma, int l_star) {
  PhaseReport rep;
  rep.beta_stars = beta_star(ell, ell_sigma, l_star);
  rep.ell = ell;
  rep.ell_sigma = ell_sigma;
  rep.l_star = l_star;
  return rep;
}

}  // namespace convkernel
