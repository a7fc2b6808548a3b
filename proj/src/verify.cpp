#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "convkernel/errors.hpp"
#include "convkernel/harness.hpp"

namespace convkernel::checks {

namespace {

using Clock = std::chrono::steady_clock;

VerifyCheck timed(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  VerifyCheck check;
  check.name = name;
  const auto start = Clock::now();
  try {
    auto [pass, detail] = body();
    check.pass = pass;
    check.detail = detail;
  } catch (const std::exception& e) {
    check.pass = false;
    check.detail = std::string("exception: ") + e.what();
  }
  check.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return check;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

// Lexicographic size-l combinations of {0..d-1}.
bool next_combination(std::vector<int>& comb, int d) {
  const int l = static_cast<int>(comb.size());
  int i = l - 1;
  while (i >= 0 && comb[static_cast<std::size_t>(i)] == d - l + i) --i;
  if (i < 0) return false;
  ++comb[static_cast<std::size_t>(i)];
  for (int j = i + 1; j < l; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
  return true;
}

std::vector<InnerFunction> inner_variants() {
  return {InnerFunction::exponential(), InnerFunction::gaussian_rbf(1.0),
          InnerFunction::polynomial({0.25, -0.5, 0.125, 1.0})};
}

// First seed at or after `seed` whose draw has n distinct points (duplicates
// make the lambda = 0 interpolator nonexistent).
Dataset distinct_point_dataset(std::size_t n, int d, int l_star, double sigma, std::uint64_t seed) {
  for (std::uint64_t s = seed; s < seed + 1000; ++s) {
    Dataset ds = make_dataset(n, d, l_star, sigma, s);
    if (!has_duplicate_points(ds.points)) return ds;
  }
  throw std::runtime_error("distinct_point_dataset: no collision-free draw found");
}

}  // namespace

VerifyCheck combinatorics(const std::vector<int>& d_values, int max_q) {
  return timed("combinatorics: C(l,q,d) vs brute force", [&]() -> std::pair<bool, std::string> {
    std::size_t cases = 0;
    for (int d : d_values)
      for (int q = 0; q <= max_q; ++q) {
        if (2 * q >= d) continue;
        for (int l = 0; l <= q; ++l) {
          // brute force over all size-l subsets
          std::int64_t brute = 0;
          if (l == 0) {
            brute = 1;
          } else {
            std::vector<int> comb(static_cast<std::size_t>(l));
            for (int i = 0; i < l; ++i) comb[static_cast<std::size_t>(i)] = i;
            do {
              if (cyclic_diameter(comb, d) <= q) ++brute;
            } while (next_combination(comb, d));
          }
          const std::int64_t closed = count_local_subsets(l, q, d);
          const auto enumerated = static_cast<std::int64_t>(enumerate_local_subsets(l, q, d).size());
          ++cases;
          if (brute != closed || brute != enumerated)
            return {false, "mismatch at l=" + std::to_string(l) + " q=" + std::to_string(q) +
                               " d=" + std::to_string(d) + ": brute " + std::to_string(brute) +
                               " closed " + std::to_string(closed) + " enum " + std::to_string(enumerated)};
        }
      }
    return {true, std::to_string(cases) + " (l,q,d) triples, exact equality"};
  });
}

VerifyCheck xi_reconstruction(int max_q) {
  return timed("xi: Krawtchouk projection vs 2^q oracle + reconstruction", [&]() -> std::pair<bool, std::string> {
    double worst_oracle = 0.0, worst_recon = 0.0;
    for (const auto& inner : inner_variants()) {
      for (int q = 1; q <= max_q; ++q) {
        const XiCoefficients xi = xi_coefficients(inner, q);
        // Exhaustive projection: xi_l = E_z[kappa(sum z / q) * sum_{|S|=l} prod_S z],
        // subsets enumerated explicitly (no Krawtchouk identity involved).
        std::vector<double> oracle(static_cast<std::size_t>(q) + 1, 0.0);
        const std::size_t total = std::size_t{1} << q;
        for (std::size_t mask = 0; mask < total; ++mask) {
          std::vector<double> z(static_cast<std::size_t>(q));
          double sum = 0.0;
          for (int i = 0; i < q; ++i) {
            z[static_cast<std::size_t>(i)] = ((mask >> i) & 1u) ? -1.0 : 1.0;
            sum += z[static_cast<std::size_t>(i)];
          }
          const double kv = inner(sum / q);
          for (int l = 0; l <= q; ++l) {
            double subset_sum = 0.0;
            if (l == 0) {
              subset_sum = 1.0;
            } else {
              std::vector<int> comb(static_cast<std::size_t>(l));
              for (int i = 0; i < l; ++i) comb[static_cast<std::size_t>(i)] = i;
              do {
                double prod = 1.0;
                for (int idx : comb) prod *= z[static_cast<std::size_t>(idx)];
                subset_sum += prod;
              } while (next_combination(comb, q));
            }
            oracle[static_cast<std::size_t>(l)] += kv * subset_sum;
          }
        }
        for (int l = 0; l <= q; ++l) {
          oracle[static_cast<std::size_t>(l)] /= static_cast<double>(total);
          const double ref = oracle[static_cast<std::size_t>(l)];
          const double err = std::abs(xi.values[static_cast<std::size_t>(l)] - ref) /
                             std::max(std::abs(ref), 1.0);
          worst_oracle = std::max(worst_oracle, err);
        }
        worst_recon = std::max(worst_recon, xi.max_reconstruction_error(inner));
      }
    }
    const bool pass = worst_oracle <= 1e-10 && worst_recon <= 1e-10;
    return {pass, fmt("max oracle err %.2e, max reconstruction err %.2e (tol 1e-10)", worst_oracle,
                      worst_recon)};
  });
}

VerifyCheck spectrum_oracle(int d, int q, double time_budget_seconds) {
  return timed("spectrum oracle: 2^" + std::to_string(d) + " operator vs closed form (q=" +
                   std::to_string(q) + ")",
               [&]() -> std::pair<bool, std::string> {
    const auto start = Clock::now();
    const InnerFunction inner = InnerFunction::exponential();
    const Spectrum spectrum = full_spectrum(d, q, inner);
    const std::vector<double> brute = brute_force_spectrum(d, q, inner);
    // The operator has every closed-form eigenvalue plus zeros for the
    // monomials outside the expansion; compare the sorted-descending lists.
    std::vector<double> expected;
    expected.reserve(brute.size());
    for (const auto& p : spectrum.pairs) expected.push_back(p.eigenvalue);
    expected.resize(brute.size(), 0.0);
    std::sort(expected.begin(), expected.end(), std::greater<>());
    double worst = 0.0;
    for (std::size_t i = 0; i < brute.size(); ++i)
      worst = std::max(worst, std::abs(brute[i] - expected[i]));
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    const bool pass = worst <= 1e-10 && elapsed < time_budget_seconds;
    return {pass, fmt("max |diff| %.2e (tol 1e-10), %.1fs (budget %.0fs)", worst, elapsed,
                      time_budget_seconds)};
  });
}

VerifyCheck q_diagonal(int d, int q) {
  return timed("Q_l diagonal: |Q_l(x,x) - 1| (d=" + std::to_string(d) + ", q=" + std::to_string(q) + ")",
               [&]() -> std::pair<bool, std::string> {
    const PointList pts = sample_points(4, d, 20240501);
    double worst = 0.0;
    for (const auto& x : pts)
      for (int l = 0; l <= q; ++l)
        worst = std::max(worst, std::abs(q_kernel_eval(d, q, l, x, x) - 1.0));
    return {worst <= 1e-12, fmt("max deviation %.2e (tol 1e-12)", worst)};
  });
}

VerifyCheck trace_identity() {
  return timed("trace identity: sum lambda_S = kappa(1)", [&]() -> std::pair<bool, std::string> {
    double worst = 0.0;
    const std::pair<int, int> shapes[] = {{9, 4}, {11, 3}, {13, 5}};
    for (const auto& inner : inner_variants())
      for (auto [d, q] : shapes) {
        const Spectrum spectrum = full_spectrum(d, q, inner);
        worst = std::max(worst, std::abs(spectrum.trace() - inner(1.0)));
      }
    return {worst <= 1e-10, fmt("max |trace - kappa(1)| %.2e (tol 1e-10)", worst)};
  });
}

VerifyCheck risk_closed_vs_mc(int d, int q, std::size_t n, double sigma, int l_star,
                              const std::vector<double>& lambdas, std::size_t draws,
                              double stderr_mult, std::uint64_t seed) {
  char name[160];
  std::snprintf(name, sizeof(name), "closed-form vs MC risk (d=%d q=%d n=%zu sigma=%g, %zu draws)", d,
                q, n, sigma, draws);
  return timed(name, [&]() -> std::pair<bool, std::string> {
    const InnerFunction inner = InnerFunction::exponential();
    const Dataset ds = distinct_point_dataset(n, d, l_star, sigma, seed);
    const ConvKernel kernel{d, q, inner};
    const Spectrum spectrum = full_spectrum(d, q, inner);
    double worst_pull = 0.0;
    for (double lambda : lambdas) {
      const KrrModel model = fit(ds, kernel, lambda);
      const RiskReport exact = closed_form_risk(model, spectrum);
      const RiskReport mc = monte_carlo_risk(ds, kernel, lambda, draws, McTestMode::exhaustive());
      const double bias_pull = std::abs(exact.bias_sq - mc.bias_sq) / std::max(mc.bias_stderr, 1e-300);
      const double var_pull = std::abs(exact.variance - mc.variance) / std::max(mc.variance_stderr, 1e-300);
      worst_pull = std::max({worst_pull, bias_pull, var_pull});
    }
    return {worst_pull <= stderr_mult,
            fmt("max |closed - mc| = %.2f stderr (allowed %.0f)", worst_pull, stderr_mult)};
  });
}

VerifyCheck sandwich_audit(int d, int q, std::size_t n, int l_star, double sigma,
                           const std::vector<double>& lambdas, std::size_t n_seeds,
                           SandwichStats* stats_out) {
  char name[160];
  std::snprintf(name, sizeof(name), "fixed-design sandwich audit (d=%d q=%d n=%zu, %zu seeds)", d, q, n,
                n_seeds);
  return timed(name, [&]() -> std::pair<bool, std::string> {
    const InnerFunction inner = InnerFunction::exponential();
    const ConvKernel kernel{d, q, inner};
    const Spectrum spectrum = full_spectrum(d, q, inner);
    SandwichStats stats;
    std::string violation;
    // Cells run in parallel over seeds; slots preassigned.
    struct CellOut {
      SandwichStats stats;
      std::string violation;
    };
    std::vector<CellOut> outs(n_seeds);
    parallel_for(n_seeds, [&](std::size_t s) {
      CellOut& out = outs[s];
      const Dataset ds = make_dataset(n, d, l_star, sigma, 1000 + s);
      for (double lambda : lambdas) {
        const std::size_t auto_m = select_truncation(spectrum, n, lambda);
        const std::size_t m_options[] = {auto_m, std::size_t{1}};
        for (std::size_t mi = 0; mi < 2; ++mi) {
          if (mi == 1 && m_options[1] == m_options[0]) continue;
          BoundsReport rep;
          try {
            rep = fixed_design_bounds(ds, kernel, spectrum, lambda, m_options[mi]);
          } catch (const SingularSystemError&) {
            // duplicate draws (or otherwise rank-deficient grams) have no
            // lambda = 0 estimator; nothing to audit.
            continue;
          }
          ++out.stats.cells;
          if (mi == 0) {
            ++out.stats.auto_cells;
            if (rep.preconditions_ok) ++out.stats.full_preconditions;
          }
          if (rep.concentration_ok && rep.r1_positive) {
            ++out.stats.var_checked;
            if (!(rep.var_lo <= rep.var_exact && rep.var_exact <= rep.var_hi)) {
              ++out.stats.violations;
              out.violation = fmt("variance sandwich violated: lo %.6e exact %.6e", rep.var_lo,
                                  rep.var_exact) +
                              fmt(" hi %.6e", rep.var_hi);
            }
            if (rep.fstar_in_span) {
              ++out.stats.bias_checked;
              if (!(rep.bias_lo <= rep.bias_exact && rep.bias_exact <= rep.bias_hi)) {
                ++out.stats.violations;
                out.violation = fmt("bias sandwich violated: lo %.6e exact %.6e", rep.bias_lo,
                                    rep.bias_exact) +
                                fmt(" hi %.6e", rep.bias_hi);
              }
            }
          }
        }
      }
    });
    for (const auto& out : outs) {
      stats.cells += out.stats.cells;
      stats.var_checked += out.stats.var_checked;
      stats.bias_checked += out.stats.bias_checked;
      stats.violations += out.stats.violations;
      stats.full_preconditions += out.stats.full_preconditions;
      stats.auto_cells += out.stats.auto_cells;
      if (!out.violation.empty()) violation = out.violation;
    }
    if (stats_out) *stats_out = stats;
    const bool pass = stats.violations == 0 && stats.var_checked > 0;
    std::string detail = "0 violations in " + std::to_string(stats.var_checked) + " variance + " +
                         std::to_string(stats.bias_checked) + " bias live checks (" +
                         std::to_string(stats.cells) + " cells)";
    if (!violation.empty()) detail = violation;
    return {pass, detail};
  });
}

VerifyCheck bias_sandwich_live() {
  return timed("all-preconditions fixed-design sandwich (d=12 q=3 n=800 m=13)",
               [&]() -> std::pair<bool, std::string> {
    const int d = 12, q = 3;
    const std::size_t n = 800, m = 13;  // {} block + the 12 degree-1 monomials
    const InnerFunction inner = InnerFunction::exponential();
    const ConvKernel kernel{d, q, inner};
    const Spectrum spectrum = full_spectrum(d, q, inner);
    std::size_t live = 0;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      const Dataset ds = make_dataset(n, d, 1, 0.5, seed);
      for (double lambda : {1.0, 4.0}) {
        const BoundsReport rep = fixed_design_bounds(ds, kernel, spectrum, lambda, m);
        if (!rep.preconditions_ok) continue;
        ++live;
        if (!(rep.var_lo <= rep.var_exact && rep.var_exact <= rep.var_hi))
          return {false, fmt("variance sandwich violated: lo %.6e exact %.6e hi %.6e", rep.var_lo,
                             rep.var_exact, rep.var_hi)};
        if (!(rep.bias_lo <= rep.bias_exact && rep.bias_exact <= rep.bias_hi))
          return {false, fmt("bias sandwich violated: lo %.6e exact %.6e hi %.6e", rep.bias_lo,
                             rep.bias_exact, rep.bias_hi)};
      }
    }
    if (live == 0) return {false, "no cell had all preconditions (expected most)"};
    return {true, std::to_string(live) + "/6 cells fully live, all four inequalities hold"};
  });
}

VerifyCheck trainerr_formula(int d, int q, std::size_t n, double sigma, int l_star, double lambda,
                             std::size_t draws, std::uint64_t seed) {
  char name[160];
  std::snprintf(name, sizeof(name), "training-error formula (d=%d q=%d n=%zu lambda=%g, %zu draws)",
                d, q, n, lambda, draws);
  return timed(name, [&]() -> std::pair<bool, std::string> {
    const InnerFunction inner = InnerFunction::exponential();
    const Dataset ds = distinct_point_dataset(n, d, l_star, sigma, seed);
    const ConvKernel kernel{d, q, inner};
    const Spectrum spectrum = full_spectrum(d, q, inner);

    const KrrModel model0 = fit(ds, kernel, 0.0);
    if (expected_training_error(model0, spectrum) != 0.0)
      return {false, "training error at lambda=0 not exactly 0"};

    const KrrModel model = fit(ds, kernel, lambda);
    const double closed = expected_training_error(model, spectrum);
    // Noise-resampling oracle: train err of one draw is lambda^2 |alpha|^2 / n.
    Eigen::MatrixXd h = model.gram;
    h.diagonal().array() += lambda;
    const Eigen::LDLT<Eigen::MatrixXd> factor(h);
    Eigen::VectorXd f(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      f(static_cast<Eigen::Index>(i)) = ds.ground_truth_value(ds.points[i]);
    const std::uint64_t mc_base = derive_stream_seed(ds.seed, 7);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t t = 0; t < draws; ++t) {
      GaussianSampler noise(derive_stream_seed(mc_base, t));
      Eigen::VectorXd y = f;
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += sigma * noise.next();
      const double err = lambda * lambda * factor.solve(y).squaredNorm() / static_cast<double>(n);
      sum += err;
      sum_sq += err * err;
    }
    const double mean = sum / static_cast<double>(draws);
    const double var = (sum_sq - static_cast<double>(draws) * mean * mean) / (static_cast<double>(draws) - 1.0);
    const double stderr_mean = std::sqrt(std::max(var, 0.0) / static_cast<double>(draws));
    const double pull = std::abs(closed - mean) / std::max(stderr_mean, 1e-300);
    return {pull <= 3.0, fmt("closed %.6e vs mc %.6e: %.2f stderr (allowed 3)", closed, mean, pull)};
  });
}

VerifyCheck rates_calculus(std::size_t n_random_draws) {
  return timed("rate calculus: point values, grid-scan agreement, phase-diagram structure",
               [&]() -> std::pair<bool, std::string> {
    // Exact point values.
    {
      RateParams p{2.0, 0.4, 0.6, 0.0, 1};
      const RateExponents e = rate_exponents(p);
      if (std::abs(e.eta_v - (-0.4)) > 1e-15) return {false, fmt("eta_v point value %.17g != -0.4", e.eta_v)};
    }
    {
      RateParams p{2.0, 0.5, 0.0, 0.0, 2};
      const RateExponents e = rate_exponents(p);
      if (std::abs(e.eta_b - (-0.5)) > 1e-15) return {false, fmt("eta_b point value %.17g != -0.5", e.eta_b)};
    }

    // Random-draw agreement with a 1e-6-step grid scan.
    std::mt19937_64 rng(99);
    auto uniform = [&](double lo, double hi) {
      return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    for (std::size_t t = 0; t < n_random_draws; ++t) {
      RateParams p;
      p.ell = uniform(1.2, 3.5);
      p.beta = uniform(0.15, 0.9);
      const int max_lstar = std::max(1, static_cast<int>(std::floor((p.ell - 1.0) / p.beta)) + 1);
      p.l_star = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(3, max_lstar)));
      if (p.ell_bar() < 0.0) p.l_star = 1;
      p.ell_sigma = uniform(-p.ell_bar(), 1.5);
      const OptimalRegRate opt = optimal_reg_rate(p);
      // grid scan against the raw exponent formulas
      const double step = 1e-6;
      const double ell_bar = std::max(0.0, p.ell_bar());
      double best = 1e300, best_x = 0.0;
      for (double x = 0.0; x <= ell_bar + 0.5 * step; x += step) {
        const double xx = std::min(x, ell_bar);
        const double eta = eta_value(p, xx);
        if (eta < best) {
          best = eta;
          best_x = xx;
        }
      }
      if (std::abs(best - opt.eta_min) > 1e-6)
        return {false, fmt("draw %g: eta_min %.9g vs grid %.9g", static_cast<double>(t), opt.eta_min, best)};
      if (best_x < opt.lo - 1.5 * step || best_x > opt.hi + 1.5 * step)
        return {false, fmt("draw %g: grid argmin %.9g outside [lo,hi] = [%.9g, ...]",
                           static_cast<double>(t), best_x, opt.lo)};
    }

    // phase-diagram structure: one beta* in (0,1); regularized rate <= interpolator
    // rate everywhere; strictly below for beta < beta* except at the isolated
    // multiple-descent peaks (where 0 is a non-unique minimizer and the two
    // rates touch); equal above beta*.
    const BetaStarScan scan = beta_star(2.0, 0.6, 2);
    if (scan.roots.empty()) return {false, "no beta* root found for the reference phase configuration"};
    const double root = scan.roots.front();
    if (!(root > 0.0 && root < 1.0)) return {false, "beta* outside (0,1)"};
    for (double beta = 0.05; beta < 0.95; beta += 0.01) {
      RateParams p{2.0, beta, 0.6, 0.0, 2};
      const double eta0 = rate_exponents(p).eta;
      const OptimalRegRate opt = optimal_reg_rate(p);
      const Regime regime = training_error_regime(p);
      if (opt.eta_min > eta0 + 2e-9)
        return {false, fmt("eta_min %.9g above interpolator eta %.9g at beta %.3g", opt.eta_min, eta0, beta)};
      if (beta < root - 1e-6) {
        if (regime == Regime::kHarmlessInterpolation)
          return {false, fmt("harmless regime below beta* at beta %.3g", beta)};
        if (regime == Regime::kHarmfulInterpolation && !(opt.eta_min < eta0 - 1e-12))
          return {false, fmt("no strict gap below beta* at beta %.3g", beta)};
        if (regime == Regime::kBoundary && std::abs(opt.eta_min - eta0) > 2e-9)
          return {false, fmt("rates fail to touch at the peak beta %.3g", beta)};
      }
      if (beta > root + 1e-6) {
        if (std::abs(opt.eta_min - eta0) > 2e-9)
          return {false, fmt("rates differ above beta* at beta %.3g", beta)};
        if (regime != Regime::kHarmlessInterpolation)
          return {false, fmt("regime not harmless above beta* at beta %.3g", beta)};
      }
    }
    // Regime flip around each root.
    for (double r : scan.roots) {
      RateParams below{2.0, r - 1e-4, 0.6, 0.0, 2};
      RateParams above{2.0, r + 1e-4, 0.6, 0.0, 2};
      if (training_error_regime(below) != Regime::kHarmfulInterpolation ||
          training_error_regime(above) != Regime::kHarmlessInterpolation)
        return {false, fmt("regime does not flip across beta* %.6g", r)};
    }
    return {true, fmt("beta* = %.9g (%g roots); %g random draws agree with 1e-6 grid scan",
                      root, static_cast<double>(scan.roots.size()), static_cast<double>(n_random_draws))};
  });
}

VerifyCheck determinism_roundtrip() {
  return timed("determinism: serial vs parallel byte-identical results.csv",
               [&]() -> std::pair<bool, std::string> {
    ExperimentConfig cfg;
    cfg.inner = "exp";
    cfg.d_grid = {9};
    cfg.beta_grid = {0.4, 0.6};
    cfg.ell = 2.0;
    cfg.ell_sigma = 0.5;
    cfg.l_star = 2;
    cfg.lambdas = {0.0, 1.0};
    cfg.seeds = {1, 2};
    cfg.mode = ExperimentConfig::Mode::kRiskSweep;
    cfg.svg = true;

    const char* saved = std::getenv("CONVKERNEL_WORKERS");
    const std::string saved_value = saved ? saved : "";

    cfg.out_dir = "/tmp/convkernel_verify_serial";
    setenv("CONVKERNEL_WORKERS", "1", 1);
    const RunResult serial = run(cfg);
    cfg.out_dir = "/tmp/convkernel_verify_parallel";
    setenv("CONVKERNEL_WORKERS", "4", 1);
    const RunResult parallel = run(cfg);
    const RunResult parallel2 = run(cfg);

    if (saved)
      setenv("CONVKERNEL_WORKERS", saved_value.c_str(), 1);
    else
      unsetenv("CONVKERNEL_WORKERS");

    if (serial.results_csv != parallel.results_csv) return {false, "serial vs parallel CSV differ"};
    if (parallel.results_csv != parallel2.results_csv) return {false, "rerun CSV differs"};
    return {true, std::to_string(serial.rows.size()) + " rows byte-identical across 3 runs"};
  });
}

VerifyCheck phase_trend() {
  return timed("phase-transition trend (desk scale)", [&]() -> std::pair<bool, std::string> {
    ExperimentConfig cfg;
    cfg.inner = "exp";
    cfg.ell = 2.0;
    cfg.ell_sigma = 0.0;
    cfg.l_star = 2;
    const std::vector<int> ds = {16, 24, 32};
    const std::vector<double> betas = {0.2, 0.35, 0.5, 0.65, 0.8};
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

    struct CellResult {
      double beta = 0.0;
      double ratio = std::numeric_limits<double>::quiet_NaN();  // NaN: singular interpolator
      double trainerr_ratio = 0.0;
      bool failed = false;
    };
    std::vector<CellResult> results(ds.size() * betas.size() * seeds.size());
    parallel_for(results.size(), [&](std::size_t idx) {
      const std::size_t si = idx % seeds.size();
      const std::size_t bi = (idx / seeds.size()) % betas.size();
      const std::size_t di = idx / (seeds.size() * betas.size());
      CellResult& out = results[idx];
      out.beta = betas[bi];
      try {
        const Cell cell = make_cell(cfg, ds[di], betas[bi], seeds[si]);
        const GridOptimum opt = optimize_ridge(cell.sweep);
        const double sigma2 = cfg.sigma2_of(ds[di]);
        out.trainerr_ratio = opt.point.train_err / sigma2;
        try {
          out.ratio = cell.sweep.eval(0.0).risk / opt.point.risk;
        } catch (const SingularSystemError&) {
          // rank-deficient gram: interpolator cell excluded per failure-isolation policy
        }
      } catch (const std::exception&) {
        out.failed = true;
      }
    });

    for (const auto& r : results)
      if (r.failed) return {false, "a grid cell failed unexpectedly"};

    std::vector<double> xs, ys;
    for (const auto& r : results)
      if (std::isfinite(r.ratio)) {
        xs.push_back(r.beta);
        ys.push_back(r.ratio);
      }
    if (xs.size() < 10) return {false, "too few surviving interpolator cells"};
    const double rho = spearman_rho(xs, ys);
    const double p = spearman_p_negative(rho, xs.size());

    // trainerr ratio must drop from the smallest to the largest beta in every
    // (d, seed) pair.
    std::size_t pairs_ok = 0, pairs = 0;
    for (std::size_t di = 0; di < ds.size(); ++di)
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const auto at = [&](std::size_t bi) {
          return results[di * betas.size() * seeds.size() + bi * seeds.size() + si];
        };
        ++pairs;
        if (at(0).trainerr_ratio > at(betas.size() - 1).trainerr_ratio) ++pairs_ok;
      }

    const bool pass = rho < 0.0 && p < 0.05 && pairs_ok == pairs;
    return {pass, fmt("Spearman rho %.3f (p %.4g) over %g surviving cells; ", rho, p,
                      static_cast<double>(xs.size())) +
                      std::to_string(pairs_ok) + "/" + std::to_string(pairs) +
                      " seeds with trainerr ratio dropping from beta=0.2 to 0.8"};
  });
}

VerifyCheck trainerr_endpoints() {
  return timed("trainerr ratio endpoints (d=32, beta 0.2 vs 0.8)", [&]() -> std::pair<bool, std::string> {
    ExperimentConfig cfg;
    cfg.inner = "exp";
    cfg.ell = 2.0;
    cfg.ell_sigma = 0.0;
    cfg.l_star = 2;
    const double sigma2 = cfg.sigma2_of(32);
    double low_beta_ratio = 0.0, high_beta_ratio = 0.0;
    for (std::uint64_t seed : {1, 2}) {
      const Cell strong_bias = make_cell(cfg, 32, 0.2, seed);
      const Cell weak_bias = make_cell(cfg, 32, 0.8, seed);
      low_beta_ratio = optimize_ridge(strong_bias.sweep).point.train_err / sigma2;
      high_beta_ratio = optimize_ridge(weak_bias.sweep).point.train_err / sigma2;
      if (!(low_beta_ratio > 0.9))
        return {false, fmt("ratio %.3f at beta=0.2 not > 0.9", low_beta_ratio)};
      if (!(high_beta_ratio <= 0.9))
        return {false, fmt("ratio %.3f at beta=0.8 not <= 0.9", high_beta_ratio)};
    }
    return {true, fmt("ratio %.3f at beta=0.2 (> 0.9), %.3f at beta=0.8 (<= 0.9)", low_beta_ratio,
                      high_beta_ratio)};
  });
}

}  // namespace convkernel::checks

namespace convkernel {

VerifyReport verify(bool full) {
  VerifyReport report;
  auto add = [&](VerifyCheck check) { report.checks.push_back(std::move(check)); };

  add(checks::combinatorics({15, 16}, 7));
  add(checks::xi_reconstruction(full ? 10 : 8));
  add(checks::spectrum_oracle(8, 3, 10.0));
  add(checks::q_diagonal(16, 5));
  add(checks::trace_identity());
  add(checks::rates_calculus(full ? 100 : 25));
  if (full) {
    add(checks::risk_closed_vs_mc(12, 4, 64, 0.5, 2, {0.0, 1.0, 10.0}, 2000, 3.0, 42));
    add(checks::sandwich_audit(16, 4, 100, 2, 0.5, {0.0, 1.0, 16.0}, 20, nullptr));
    add(checks::bias_sandwich_live());
    add(checks::trainerr_formula(16, 4, 100, 0.5, 2, 2.0, 5000, 42));
    add(checks::trainerr_endpoints());
    add(checks::spectrum_oracle(12, 4, 600.0));
  } else {
    add(checks::risk_closed_vs_mc(10, 4, 48, 0.5, 2, {0.0, 1.0}, 600, 4.0, 42));
    add(checks::sandwich_audit(12, 4, 80, 1, 0.5, {0.0, 1.0, 12.0}, 5, nullptr));
    add(checks::trainerr_formula(12, 4, 80, 0.5, 1, 2.0, 1500, 42));
  }
  add(checks::determinism_roundtrip());
  return report;
}

}  // namespace convkernel
