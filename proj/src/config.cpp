#include "convkernel/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace convkernel {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    const std::string item = trim(s.substr(pos, next - pos));
    if (!item.empty()) out.push_back(item);
    pos = next + 1;
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& vals, Fn fmt) {
  std::string out;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) out += ",";
    out += fmt(vals[i]);
  }
  return out;
}

}  // namespace

std::string mode_name(ExperimentConfig::Mode mode) {
  switch (mode) {
    case ExperimentConfig::Mode::kRiskSweep:
      return "risk_sweep";
    case ExperimentConfig::Mode::kTrainerrSweep:
      return "trainerr_sweep";
    case ExperimentConfig::Mode::kBoundsAudit:
      return "bounds_audit";
    case ExperimentConfig::Mode::kRateFit:
      return "rate_fit";
    case ExperimentConfig::Mode::kVerify:
      return "verify";
  }
  return "";
}

std::string lambda_mode_name(ExperimentConfig::LambdaMode mode) {
  switch (mode) {
    case ExperimentConfig::LambdaMode::kList:
      return "list";
    case ExperimentConfig::LambdaMode::kOptimal:
      return "optimal";
    case ExperimentConfig::LambdaMode::kRate:
      return "rate";
  }
  return "";
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string scoped = section + "." + key;

    if (scoped == "kernel.inner") {
      cfg.inner = value;
    } else if (scoped == "grid.d") {
      cfg.d_grid.clear();
      for (auto& v : split_list(value)) cfg.d_grid.push_back(std::stoi(v));
    } else if (scoped == "grid.beta") {
      cfg.beta_grid.clear();
      for (auto& v : split_list(value)) cfg.beta_grid.push_back(std::stod(v));
    } else if (scoped == "grid.ell") {
      cfg.ell = std::stod(value);
    } else if (scoped == "grid.ell_sigma") {
      cfg.ell_sigma = std::stod(value);
    } else if (scoped == "grid.lstar") {
      cfg.l_star = std::stoi(value);
    } else if (scoped == "grid.lambda") {
      cfg.lambdas.clear();
      for (auto& v : split_list(value)) cfg.lambdas.push_back(std::stod(v));
    } else if (scoped == "grid.lambda_mode") {
      if (value == "list")
        cfg.lambda_mode = LambdaMode::kList;
      else if (value == "optimal")
        cfg.lambda_mode = LambdaMode::kOptimal;
      else if (value == "rate")
        cfg.lambda_mode = LambdaMode::kRate;
      else
        throw std::invalid_argument("config: unknown lambda_mode '" + value + "'");
    } else if (scoped == "grid.ell_lambda") {
      cfg.ell_lambda = std::stod(value);
    } else if (scoped == "grid.seeds") {
      cfg.seeds.clear();
      for (auto& v : split_list(value)) cfg.seeds.push_back(std::stoull(v));
    } else if (scoped == "output.dir") {
      cfg.out_dir = value;
    } else if (scoped == "output.mode") {
      if (value == "risk_sweep")
        cfg.mode = Mode::kRiskSweep;
      else if (value == "trainerr_sweep")
        cfg.mode = Mode::kTrainerrSweep;
      else if (value == "bounds_audit")
        cfg.mode = Mode::kBoundsAudit;
      else if (value == "rate_fit")
        cfg.mode = Mode::kRateFit;
      else if (value == "verify")
        cfg.mode = Mode::kVerify;
      else
        throw std::invalid_argument("config: unknown mode '" + value + "'");
    } else if (scoped == "output.svg") {
      cfg.svg = (value == "true" || value == "1");
    } else {
      throw std::invalid_argument("config: unknown key '" + scoped + "'");
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::to_string() const {
  std::string out;
  out += "[kernel]\n";
  out += "inner = " + inner + "\n";
  out += "[grid]\n";
  out += "d = " + join(d_grid, [](int v) { return std::to_string(v); }) + "\n";
  out += "beta = " + join(beta_grid, fmt_double) + "\n";
  out += "ell = " + fmt_double(ell) + "\n";
  out += "ell_sigma = " + fmt_double(ell_sigma) + "\n";
  out += "lstar = " + std::to_string(l_star) + "\n";
  out += "lambda_mode = " + lambda_mode_name(lambda_mode) + "\n";
  out += "lambda = " + join(lambdas, fmt_double) + "\n";
  out += "ell_lambda = " + fmt_double(ell_lambda) + "\n";
  out += "seeds = " + join(seeds, [](std::uint64_t v) { return std::to_string(v); }) + "\n";
  out += "[output]\n";
  out += "dir = " + out_dir + "\n";
  out += "mode = " + mode_name(mode) + "\n";
  out += std::string("svg = ") + (svg ? "true" : "false") + "\n";
  return out;
}

std::uint64_t ExperimentConfig::hash() const {
  const std::string text = to_string();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

int ExperimentConfig::q_of(int d, double beta) const {
  const int q = static_cast<int>(std::lround(std::pow(static_cast<double>(d), beta)));
  return std::max(1, std::min(q, (d - 1) / 2));
}

std::size_t ExperimentConfig::n_of(int d) const {
  return static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(d), ell)));
}

double ExperimentConfig::sigma2_of(int d) const {
  return std::pow(static_cast<double>(d), -ell_sigma);
}

}  // namespace convkernel
