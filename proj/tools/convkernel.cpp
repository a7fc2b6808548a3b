// Command-line front end: spectra, xi coefficients, fits, risks, bounds,
// training errors, rate curves, config-driven sweeps, and the verification
// suite. See README.md for the column layouts.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "convkernel/errors.hpp"
#include "convkernel/harness.hpp"

using namespace convkernel;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool strict = false;
};

ExperimentConfig load_config(const CommonOpts& opts, ExperimentConfig::Mode mode) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = ExperimentConfig::load(opts.config_path);
  cfg.mode = mode;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(opts.seed)};
  return cfg;
}

int run_mode(const CommonOpts& opts, ExperimentConfig::Mode mode) {
  const ExperimentConfig cfg = load_config(opts, mode);
  const RunResult result = run(cfg);
  std::cout << result.results_csv;
  if (result.any_failed) return 1;
  if (opts.strict && mode == ExperimentConfig::Mode::kBoundsAudit) {
    for (const auto& row : result.rows) {
      // the inequalities are only claimed where their preconditions hold
      const bool var_claimed =
          std::isfinite(row.var_lo) && row.concentration_norm <= 0.5 && row.r1 > 0.0;
      const bool bias_claimed = std::isfinite(row.bias_lo) && row.preconditions_ok == 1;
      const bool var_bad = var_claimed && !(row.var_lo <= row.variance && row.variance <= row.var_hi);
      const bool bias_bad = bias_claimed && !(row.bias_lo <= row.bias_sq && row.bias_sq <= row.bias_hi);
      if (var_bad || bias_bad) {
        std::cerr << "sandwich violation at d=" << row.d << " lambda=" << row.lambda
                  << " seed=" << row.seed << "\n";
        return 2;
      }
    }
  }
  return 0;
}

int cmd_spectrum(int d, int q, const std::string& inner_spec, std::size_t top, bool oracle) {
  const InnerFunction inner = InnerFunction::parse(inner_spec);
  const Spectrum spectrum = full_spectrum(d, q, inner);
  std::cout << "lambda,degree,diameter,multiplicity\n";
  std::size_t printed = 0;
  for (std::size_t i = 0; i < spectrum.size() && printed < top;) {
    std::size_t j = i;
    while (j < spectrum.size() && spectrum.pairs[j].eigenvalue == spectrum.pairs[i].eigenvalue &&
           spectrum.pairs[j].subset.size() == spectrum.pairs[i].subset.size() &&
           spectrum.pairs[j].subset.diameter() == spectrum.pairs[i].subset.diameter())
      ++j;
    std::cout << fmt(spectrum.pairs[i].eigenvalue) << "," << spectrum.pairs[i].subset.size() << ","
              << spectrum.pairs[i].subset.diameter() << "," << (j - i) << "\n";
    printed += j - i;
    i = j;
  }
  if (oracle) {
    const auto check = checks::spectrum_oracle(d, q, 600.0);
    std::cerr << (check.pass ? "oracle ok: " : "oracle MISMATCH: ") << check.detail << "\n";
    if (!check.pass) return 3;
  }
  return 0;
}

int cmd_xi(int q, const std::string& inner_spec) {
  const XiCoefficients xi = xi_coefficients(InnerFunction::parse(inner_spec), q);
  std::cout << "l,xi\n";
  for (int l = 0; l <= q; ++l) std::cout << l << "," << fmt(xi.values[static_cast<std::size_t>(l)]) << "\n";
  return 0;
}

int cmd_fit(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts, ExperimentConfig::Mode::kRiskSweep);
  const InnerFunction inner = InnerFunction::parse(cfg.inner);
  std::cout << "d,q,n,beta,lambda,seed,solver_residual,error\n";
  int exit_code = 0;
  for (int d : cfg.d_grid)
    for (double beta : cfg.beta_grid)
      for (double lambda : cfg.lambdas)
        for (std::uint64_t seed : cfg.seeds) {
          const int q = cfg.q_of(d, beta);
          const std::size_t n = cfg.n_of(d);
          std::cout << d << "," << q << "," << n << "," << fmt(beta) << "," << fmt(lambda) << ","
                    << seed << ",";
          try {
            const Dataset ds = make_dataset(n, d, cfg.l_star, std::sqrt(cfg.sigma2_of(d)), seed);
            const KrrModel model = fit(ds, ConvKernel{d, q, inner}, lambda);
            std::cout << fmt(model.solver_residual) << ",\n";
          } catch (const std::exception& e) {
            std::cout << "nan," << e.what() << "\n";
            exit_code = 1;
          }
        }
  return exit_code;
}

int cmd_rates(double ell, double ell_sigma, int l_star, double beta_from, double beta_to,
              double beta_step, bool fig1) {
  if (fig1) {
    ell = 2.0;
    ell_sigma = 0.6;
    l_star = 2;
  }
  const BetaStarScan scan = beta_star(ell, ell_sigma, l_star);
  std::cout << "# beta_star =";
  for (double r : scan.roots) std::cout << " " << fmt(r);
  if (scan.roots.empty()) std::cout << " none";
  std::cout << (scan.unique() ? " (unique)" : " (non-unique)") << "\n";
  std::cout << "beta,eta_v0,eta_b0,eta_interpolator,eta_min,ell_min_lo,ell_min_hi,regime\n";
  for (double beta = beta_from; beta <= beta_to + 1e-12; beta += beta_step) {
    RateParams params{ell, beta, ell_sigma, 0.0, l_star};
    const RateExponents e = rate_exponents(params);
    const OptimalRegRate opt = optimal_reg_rate(params);
    std::cout << fmt(beta) << "," << fmt(e.eta_v) << "," << fmt(e.eta_b) << "," << fmt(e.eta) << ","
              << fmt(opt.eta_min) << "," << fmt(opt.lo) << "," << fmt(opt.hi) << ","
              << regime_name(training_error_regime(params)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cyclic convolutional kernel regression toolkit"};
  app.require_subcommand(1);
  CommonOpts opts;
  app.add_option("--config", opts.config_path, "config file (key = value sections)");
  app.add_option("--seed", opts.seed, "override the config seed list with a single seed");
  app.add_option("--out", opts.out_dir, "override the output directory");
  app.add_flag("--strict", opts.strict, "bounds: exit nonzero on any sandwich violation");

  // spectrum
  auto* sc_spectrum = app.add_subcommand("spectrum", "top eigenvalues with degree/diameter/multiplicity");
  int sp_d = 8, sp_q = 3;
  std::string sp_inner = "exp";
  std::size_t sp_top = 20;
  bool sp_oracle = false;
  sc_spectrum->add_option("-d,--dim", sp_d, "ambient dimension");
  sc_spectrum->add_option("-q,--filter", sp_q, "filter size");
  sc_spectrum->add_option("--inner", sp_inner, "inner function (exp | rbf:h | poly:c0,c1,...)");
  sc_spectrum->add_option("--top", sp_top, "number of eigenvalues to print");
  sc_spectrum->add_flag("--oracle", sp_oracle, "cross-check against the 2^d operator (d <= 12)");

  // xi
  auto* sc_xi = app.add_subcommand("xi", "decomposition coefficients of the inner function");
  int xi_q = 4;
  std::string xi_inner = "exp";
  sc_xi->add_option("-q,--filter", xi_q, "filter size");
  sc_xi->add_option("--inner", xi_inner, "inner function");

  auto* sc_fit = app.add_subcommand("fit", "dual solves over the config grid");
  auto* sc_risk = app.add_subcommand("risk", "closed-form bias/variance/risk over the config grid");
  auto* sc_bounds = app.add_subcommand("bounds", "fixed-design sandwich bounds over the config grid");
  auto* sc_trainerr = app.add_subcommand("trainerr", "grid-optimal ridge + expected training error");
  auto* sc_sweep = app.add_subcommand("sweep", "run the config's mode");

  // rates
  auto* sc_rates = app.add_subcommand("rates", "rate exponents over a beta grid");
  double rt_ell = 2.0, rt_ell_sigma = 0.6, rt_from = 0.05, rt_to = 0.95, rt_step = 0.01;
  int rt_lstar = 2;
  bool rt_fig1 = false;
  sc_rates->add_option("--ell", rt_ell, "samples exponent");
  sc_rates->add_option("--ell-sigma", rt_ell_sigma, "noise exponent");
  sc_rates->add_option("--lstar", rt_lstar, "ground-truth degree");
  sc_rates->add_option("--beta-from", rt_from, "grid start");
  sc_rates->add_option("--beta-to", rt_to, "grid end");
  sc_rates->add_option("--beta-step", rt_step, "grid step");
  sc_rates->add_flag("--fig1", rt_fig1, "use ell=2, ell_sigma=0.6, L*=2");

  // verify
  auto* sc_verify = app.add_subcommand("verify", "oracle verification suite");
  bool vf_full = false, vf_quick = false;
  sc_verify->add_flag("--full", vf_full, "include the long checks (d=12 oracle, MC risk, audits)");
  sc_verify->add_flag("--quick", vf_quick, "quick suite (default)");

  // global flags may appear after the subcommand name
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc_spectrum->parsed()) return cmd_spectrum(sp_d, sp_q, sp_inner, sp_top, sp_oracle);
    if (sc_xi->parsed()) return cmd_xi(xi_q, xi_inner);
    if (sc_fit->parsed()) return cmd_fit(opts);
    if (sc_risk->parsed()) return run_mode(opts, ExperimentConfig::Mode::kRiskSweep);
    if (sc_bounds->parsed()) return run_mode(opts, ExperimentConfig::Mode::kBoundsAudit);
    if (sc_trainerr->parsed()) return run_mode(opts, ExperimentConfig::Mode::kTrainerrSweep);
    if (sc_sweep->parsed()) {
      ExperimentConfig cfg;
      if (!opts.config_path.empty()) cfg = ExperimentConfig::load(opts.config_path);
      if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
      if (opts.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(opts.seed)};
      const RunResult result = run(cfg);
      std::cout << result.results_csv;
      return result.any_failed ? 1 : 0;
    }
    if (sc_rates->parsed()) return cmd_rates(rt_ell, rt_ell_sigma, rt_lstar, rt_from, rt_to, rt_step, rt_fig1);
    if (sc_verify->parsed()) {
      const VerifyReport report = verify(vf_full && !vf_quick);
      std::cout << report.table();
      return report.all_pass() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
