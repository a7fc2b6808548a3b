#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace convkernel {

// Line-oriented `key = value` config with [kernel]/[grid]/[output] sections.
// The canonical textual form round-trips losslessly through parse().
struct ExperimentConfig {
  enum class Mode { kRiskSweep, kTrainerrSweep, kBoundsAudit, kRateFit, kVerify };
  enum class LambdaMode { kList, kOptimal, kRate };

  // [kernel]
  std::string inner = "exp";

  // [grid]
  std::vector<int> d_grid = {16};
  std::vector<double> beta_grid = {0.5};
  double ell = 2.0;
  double ell_sigma = 0.0;
  int l_star = 2;
  LambdaMode lambda_mode = LambdaMode::kList;
  std::vector<double> lambdas = {0.0};
  double ell_lambda = 0.0;  // used by lambda_mode = rate (lambda = d^ell_lambda)
  std::vector<std::uint64_t> seeds = {1};

  // [output]
  std::string out_dir = "out";
  Mode mode = Mode::kRiskSweep;
  bool svg = false;

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_string() const;
  std::uint64_t hash() const;  // FNV-1a of the canonical text

  // Derived quantities: q = round(d^beta) clamped to [1, (d-1)/2],
  // n = round(d^ell), sigma^2 = d^-ell_sigma.
  int q_of(int d, double beta) const;
  std::size_t n_of(int d) const;
  double sigma2_of(int d) const;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.to_string() == b.to_string();
  }
};

std::string mode_name(ExperimentConfig::Mode mode);
std::string lambda_mode_name(ExperimentConfig::LambdaMode mode);

}  // namespace convkernel
