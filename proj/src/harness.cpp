#include "convkernel/harness.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "convkernel/errors.hpp"

namespace convkernel {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}
}  // namespace

std::size_t worker_count() {
  if (const char* env = std::getenv("CONVKERNEL_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& f) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

SweepRow::SweepRow()
    : bias_sq(kNan),
      variance(kNan),
      risk(kNan),
      train_err_ratio(kNan),
      m(kNan),
      concentration_norm(kNan),
      tau1(kNan),
      tau2(kNan),
      r1(kNan),
      r2(kNan),
      bias_lo(kNan),
      bias_hi(kNan),
      var_lo(kNan),
      var_hi(kNan) {}

std::string sweep_csv_header() {
  return "d,q,n,beta,sigma2,lambda,seed,bias_sq,variance,risk,train_err_ratio,m,"
         "concentration_norm,tau1,tau2,r1,r2,preconditions_ok,bias_lo,bias_hi,var_lo,var_hi,error\n";
}

std::string sweep_row_csv(const SweepRow& r) {
  std::string out;
  out += std::to_string(r.d) + "," + std::to_string(r.q) + "," + std::to_string(r.n) + ",";
  out += fmt(r.beta) + "," + fmt(r.sigma2) + "," + fmt(r.lambda) + "," + std::to_string(r.seed) + ",";
  out += fmt(r.bias_sq) + "," + fmt(r.variance) + "," + fmt(r.risk) + "," + fmt(r.train_err_ratio) + ",";
  out += fmt(r.m) + "," + fmt(r.concentration_norm) + "," + fmt(r.tau1) + "," + fmt(r.tau2) + ",";
  out += fmt(r.r1) + "," + fmt(r.r2) + ",";
  out += (r.preconditions_ok < 0 ? "nan" : std::to_string(r.preconditions_ok)) + ",";
  out += fmt(r.bias_lo) + "," + fmt(r.bias_hi) + "," + fmt(r.var_lo) + "," + fmt(r.var_hi) + ",";
  out += sanitize(r.error) + "\n";
  return out;
}

Cell make_cell(const ExperimentConfig& cfg, int d, double beta, std::uint64_t seed) {
  const int q = cfg.q_of(d, beta);
  const std::size_t n = cfg.n_of(d);
  const double sigma2 = cfg.sigma2_of(d);
  const InnerFunction inner = InnerFunction::parse(cfg.inner);
  Cell cell{make_dataset(n, d, cfg.l_star, std::sqrt(sigma2), seed),
            ConvKernel{d, q, inner},
            0.0,
            {},
            {},
            RidgeSweep(Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Zero(1, 1),
                       Eigen::VectorXd::Zero(1), 0.0, 0.0)};
  const XiCoefficients xi = xi_coefficients(inner, q);
  if (cfg.l_star <= q) cell.lambda_star = conv_eigenvalue(xi, d, cfg.l_star, cfg.l_star);
  cell.gram_matrix = gram(cell.kernel, cell.dataset.points);
  cell.sq_gram_matrix = sq_gram(d, q, xi, cell.dataset.points);
  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    u(static_cast<Eigen::Index>(i)) = cell.dataset.ground_truth_value(cell.dataset.points[i]);
  cell.sweep = RidgeSweep(cell.gram_matrix, cell.sq_gram_matrix, u, cell.lambda_star, sigma2);
  return cell;
}

GridOptimum optimize_ridge(const RidgeSweep& sweep) {
  auto scan = [&](const std::vector<double>& grid) {
    std::size_t best = 0;
    double best_risk = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double risk = sweep.eval(grid[i]).risk;
      if (risk < best_risk) {
        best_risk = risk;
        best = i;
      }
    }
    return best;
  };
  auto log_grid = [](double lo, double hi, std::size_t count) {
    std::vector<double> g(count);
    const double llo = std::log10(lo), lhi = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i)
      g[i] = std::pow(10.0, llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return g;
  };
  const std::vector<double> coarse = log_grid(1e-3, 1e3, 61);
  const std::size_t i = scan(coarse);
  const double lo = coarse[i == 0 ? 0 : i - 1];
  const double hi = coarse[std::min(i + 1, coarse.size() - 1)];
  const std::vector<double> fine = log_grid(lo, hi, 61);
  const std::size_t j = scan(fine);
  GridOptimum out;
  const double coarse_risk = sweep.eval(coarse[i]).risk;
  const double fine_risk = sweep.eval(fine[j]).risk;
  out.lambda = fine_risk <= coarse_risk ? fine[j] : coarse[i];
  out.point = sweep.eval(out.lambda);
  return out;
}

namespace {

struct CellKey {
  int d;
  double beta;
  double lambda;  // NaN means per-cell optimum
  std::uint64_t seed;
};

void fill_risk_columns(SweepRow& row, const RidgeSweep::Point& p, double sigma2) {
  row.bias_sq = p.bias_sq;
  row.variance = p.variance;
  row.risk = p.risk;
  row.train_err_ratio = sigma2 > 0.0 ? p.train_err / sigma2 : kNan;
}

std::string render_risk_svg(const std::vector<SweepRow>& rows) {
  // One polyline per d: mean risk over completed rows at each beta,
  // log10 scale on y. Fixed viewport, fixed palette, fixed precision.
  struct Pt {
    double beta;
    double log_risk;
  };
  std::vector<int> ds;
  for (const auto& r : rows)
    if (std::find(ds.begin(), ds.end(), r.d) == ds.end()) ds.push_back(r.d);
  std::sort(ds.begin(), ds.end());
  std::vector<std::vector<Pt>> series;
  double min_y = 1e300, max_y = -1e300, min_x = 1e300, max_x = -1e300;
  for (int d : ds) {
    std::vector<double> betas;
    for (const auto& r : rows)
      if (r.d == d && std::find(betas.begin(), betas.end(), r.beta) == betas.end())
        betas.push_back(r.beta);
    std::sort(betas.begin(), betas.end());
    std::vector<Pt> pts;
    for (double b : betas) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& r : rows)
        if (r.d == d && r.beta == b && r.error.empty() && std::isfinite(r.risk) && r.risk > 0.0) {
          sum += r.risk;
          ++count;
        }
      if (count == 0) continue;
      const Pt p{b, std::log10(sum / static_cast<double>(count))};
      min_y = std::min(min_y, p.log_risk);
      max_y = std::max(max_y, p.log_risk);
      min_x = std::min(min_x, p.beta);
      max_x = std::max(max_x, p.beta);
      pts.push_back(p);
    }
    series.push_back(std::move(pts));
  }
  const double w = 640.0, h = 480.0, ml = 60.0, mr = 20.0, mt = 20.0, mb = 40.0;
  if (!(max_x > min_x)) {
    min_x -= 0.5;
    max_x += 0.5;
  }
  if (!(max_y > min_y)) {
    min_y -= 0.5;
    max_y += 0.5;
  }
  auto sx = [&](double x) { return ml + (x - min_x) / (max_x - min_x) * (w - ml - mr); };
  auto sy = [&](double y) { return h - mb - (y - min_y) / (max_y - min_y) * (h - mt - mb); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  char buf[160];
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
                    "font-family=\"monospace\" font-size=\"12\">\n";
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                ml, mt, w - ml - mr, h - mt - mb);
  svg += buf;
  svg += "<text x=\"300\" y=\"472\">beta</text>\n<text x=\"6\" y=\"250\">log10 risk</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].empty()) continue;
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += palette[s % 6];
    svg += "\" points=\"";
    for (const auto& p : series[s]) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(p.beta), sy(p.log_risk));
      svg += buf;
    }
    svg += "\"/>\n";
    std::snprintf(buf, sizeof(buf), "<text x=\"%.2f\" y=\"%.2f\" fill=\"%s\">d=%d</text>\n",
                  w - mr - 55.0, mt + 16.0 * (static_cast<double>(s) + 1.0), palette[s % 6], ds[s]);
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::vector<RateFit> empirical_rate_fit(const std::vector<SweepRow>& rows, FitQuantity quantity) {
  auto value_of = [&](const SweepRow& r) {
    switch (quantity) {
      case FitQuantity::kBiasSq:
        return r.bias_sq;
      case FitQuantity::kVariance:
        return r.variance;
      case FitQuantity::kRisk:
        return r.risk;
    }
    return kNan;
  };
  std::vector<double> betas;
  for (const auto& r : rows)
    if (std::find(betas.begin(), betas.end(), r.beta) == betas.end()) betas.push_back(r.beta);
  std::sort(betas.begin(), betas.end());

  std::vector<RateFit> fits;
  for (double beta : betas) {
    std::vector<double> lx, ly;
    std::vector<std::size_t> distinct_n;
    for (const auto& r : rows) {
      if (r.beta != beta || !r.error.empty()) continue;
      const double v = value_of(r);
      if (!std::isfinite(v) || v <= 0.0) continue;
      lx.push_back(std::log(static_cast<double>(r.n)));
      ly.push_back(std::log(v));
      if (std::find(distinct_n.begin(), distinct_n.end(), r.n) == distinct_n.end())
        distinct_n.push_back(r.n);
    }
    if (distinct_n.size() < 3)
      throw std::invalid_argument("empirical_rate_fit: degenerate group (need >= 3 distinct n)");
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
    }
    RateFit fit;
    fit.beta = beta;
    fit.slope = sxy / sxx;
    const double intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double res = ly[i] - (intercept + fit.slope * lx[i]);
      ss += res * res;
    }
    fit.residual = std::sqrt(ss / n);
    fit.count = lx.size();
    fits.push_back(fit);
  }
  return fits;
}

RunResult run(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  RunResult result;

  if (cfg.mode == ExperimentConfig::Mode::kVerify) {
    const VerifyReport rep = verify(false);
    fs::create_directories(cfg.out_dir);
    std::ofstream table(fs::path(cfg.out_dir) / "verify.txt", std::ios::binary);
    table << rep.table();
    result.any_failed = !rep.all_pass();
    result.results_csv = sweep_csv_header();
    std::ofstream csv(fs::path(cfg.out_dir) / "results.csv", std::ios::binary);
    csv << result.results_csv;
    return result;
  }

  // Enumerate cells in deterministic nested order.
  std::vector<CellKey> keys;
  const bool per_lambda = cfg.mode == ExperimentConfig::Mode::kRiskSweep ||
                          cfg.mode == ExperimentConfig::Mode::kBoundsAudit ||
                          cfg.mode == ExperimentConfig::Mode::kRateFit;
  for (int d : cfg.d_grid)
    for (double beta : cfg.beta_grid) {
      std::vector<double> lambdas;
      if (!per_lambda || cfg.lambda_mode == ExperimentConfig::LambdaMode::kOptimal) {
        lambdas = {kNan};  // per-cell optimum
      } else if (cfg.lambda_mode == ExperimentConfig::LambdaMode::kRate) {
        lambdas = {std::pow(static_cast<double>(d), cfg.ell_lambda)};
      } else {
        lambdas = cfg.lambdas;
      }
      for (double lambda : lambdas)
        for (std::uint64_t seed : cfg.seeds) keys.push_back(CellKey{d, beta, lambda, seed});
    }

  result.rows.assign(keys.size(), SweepRow{});
  const InnerFunction inner = InnerFunction::parse(cfg.inner);

  parallel_for(keys.size(), [&](std::size_t i) {
    const CellKey& key = keys[i];
    SweepRow& row = result.rows[i];
    row.d = key.d;
    row.q = cfg.q_of(key.d, key.beta);
    row.n = cfg.n_of(key.d);
    row.beta = key.beta;
    row.sigma2 = cfg.sigma2_of(key.d);
    row.lambda = key.lambda;
    row.seed = key.seed;
    try {
      if (cfg.mode == ExperimentConfig::Mode::kBoundsAudit) {
        const Dataset ds = make_dataset(row.n, key.d, cfg.l_star, std::sqrt(row.sigma2), key.seed);
        const ConvKernel kernel{key.d, row.q, inner};
        const Spectrum spectrum = full_spectrum(key.d, row.q, inner);
        const BoundsReport rep = fixed_design_bounds(ds, kernel, spectrum, key.lambda);
        row.bias_sq = rep.bias_exact;
        row.variance = rep.var_exact;
        row.risk = rep.bias_exact + rep.var_exact;
        row.m = static_cast<double>(rep.m);
        row.concentration_norm = rep.diag.concentration_norm;
        row.tau1 = rep.diag.tau1;
        row.tau2 = rep.diag.tau2;
        row.r1 = rep.diag.r1;
        row.r2 = rep.diag.r2;
        row.preconditions_ok = rep.preconditions_ok ? 1 : 0;
        row.bias_lo = rep.bias_lo;
        row.bias_hi = rep.bias_hi;
        row.var_lo = rep.var_lo;
        row.var_hi = rep.var_hi;
        return;
      }
      const Cell cell = make_cell(cfg, key.d, key.beta, key.seed);
      if (std::isnan(key.lambda)) {
        const GridOptimum opt = optimize_ridge(cell.sweep);
        row.lambda = opt.lambda;
        fill_risk_columns(row, opt.point, row.sigma2);
      } else {
        fill_risk_columns(row, cell.sweep.eval(key.lambda), row.sigma2);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  std::stable_sort(result.rows.begin(), result.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.beta != b.beta) return a.beta < b.beta;
    const bool an = std::isnan(a.lambda), bn = std::isnan(b.lambda);
    if (an != bn) return bn;
    if (!an && a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.seed < b.seed;
  });

  result.results_csv = sweep_csv_header();
  for (const auto& r : result.rows) {
    result.results_csv += sweep_row_csv(r);
    if (!r.error.empty()) result.any_failed = true;
  }

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream csv(fs::path(cfg.out_dir) / "results.csv", std::ios::binary);
    csv << result.results_csv;
  }
  {
    std::ofstream meta(fs::path(cfg.out_dir) / "meta.txt", std::ios::binary);
    meta << "convkernel 0.1.0\n";
    meta << "config_hash = " << cfg.hash() << "\n";
    meta << cfg.to_string();
  }
  if (cfg.mode == ExperimentConfig::Mode::kRateFit) {
    std::string fit_csv = "beta,quantity,slope,residual,count\n";
    const std::pair<FitQuantity, const char*> quantities[] = {
        {FitQuantity::kBiasSq, "bias_sq"}, {FitQuantity::kVariance, "variance"}, {FitQuantity::kRisk, "risk"}};
    for (auto [quantity, name] : quantities)
      for (const auto& fit : empirical_rate_fit(result.rows, quantity))
        fit_csv += fmt(fit.beta) + std::string(",") + name + "," + fmt(fit.slope) + "," +
                   fmt(fit.residual) + "," + std::to_string(fit.count) + "\n";
    std::ofstream fit_file(fs::path(cfg.out_dir) / "rate_fit.csv", std::ios::binary);
    fit_file << fit_csv;
  }
  if (cfg.svg) {
    std::ofstream svg(fs::path(cfg.out_dir) / "plot.svg", std::ios::binary);
    svg << render_risk_svg(result.rows);
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman_rho: bad input");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double spearman_p_negative(double rho, std::size_t n) {
  if (n < 3) return 1.0;
  const double dof = static_cast<double>(n) - 2.0;
  const double denom = std::max(1.0 - rho * rho, 1e-15);
  const double t = rho * std::sqrt(dof / denom);
  boost::math::students_t_distribution<double> dist(dof);
  return boost::math::cdf(dist, t);
}

bool VerifyReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string VerifyReport::table() const {
  std::string out;
  char buf[64];
  for (const auto& c : checks) {
    out += c.pass ? "[PASS] " : "[FAIL] ";
    out += c.name;
    std::snprintf(buf, sizeof(buf), " (%.2fs)", c.seconds);
    out += buf;
    if (!c.detail.empty()) out += ": " + c.detail;
    out += "\n";
  }
  out += all_pass() ? "all checks passed\n" : "CHECKS FAILED\n";
  return out;
}

}  // namespace convkernel
