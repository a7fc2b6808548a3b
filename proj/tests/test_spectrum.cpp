#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "convkernel/errors.hpp"
#include "convkernel/spectrum.hpp"

using namespace convkernel;

namespace {
const InnerFunction kExp = InnerFunction::exponential();
}

TEST_CASE("full_spectrum: count, order, empty-set eigenvalue") {
  const Spectrum sp = full_spectrum(8, 3, kExp);
  CHECK(sp.size() == 33);  // 1 + 8 * 2^2
  const XiCoefficients xi = xi_coefficients(kExp, 3);
  // lambda for the empty set is xi_0 (all d windows contain it)
  const auto pos = sp.find(IndexSet({}, 8));
  REQUIRE(pos.has_value());
  CHECK(sp.pairs[*pos].eigenvalue == doctest::Approx(xi.values[0]).epsilon(1e-15));
  // descending order with deterministic tie-break
  for (std::size_t i = 0; i + 1 < sp.size(); ++i) {
    CHECK(sp.pairs[i].eigenvalue >= sp.pairs[i + 1].eigenvalue);
    if (sp.pairs[i].eigenvalue == sp.pairs[i + 1].eigenvalue) {
      const auto& a = sp.pairs[i].subset;
      const auto& b = sp.pairs[i + 1].subset;
      CHECK(std::make_tuple(a.size(), a.diameter(), a.members()) <
            std::make_tuple(b.size(), b.diameter(), b.members()));
    }
  }
  CHECK_THROWS_AS(full_spectrum(8, 4, kExp), std::invalid_argument);       // q >= d/2
  CHECK_THROWS_AS(full_spectrum(100, 40, kExp, 1000), ResourceLimitError);  // cap
}

TEST_CASE("trace identity: sum of eigenvalues equals kappa(1)") {
  for (int q : {2, 3}) {
    const Spectrum sp = full_spectrum(8, q, kExp);
    CHECK(sp.trace() == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  }
  const InnerFunction rbf = InnerFunction::gaussian_rbf(0.8);
  CHECK(full_spectrum(9, 4, rbf).trace() == doctest::Approx(rbf(1.0)).epsilon(1e-12));
}

TEST_CASE("brute-force operator oracle matches the closed form") {
  const int d = 8, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const std::vector<double> brute = brute_force_spectrum(d, q, kExp);
  REQUIRE(brute.size() == 256);
  std::vector<double> expected;
  for (const auto& p : sp.pairs) expected.push_back(p.eigenvalue);
  expected.resize(brute.size(), 0.0);
  std::sort(expected.begin(), expected.end(), std::greater<>());
  for (std::size_t i = 0; i < brute.size(); ++i) CHECK(std::abs(brute[i] - expected[i]) <= 1e-10);

  // multiplicity of each eigenvalue matches the (degree, diameter) profile count
  std::map<std::pair<int, int>, std::size_t> profile_counts;
  for (const auto& p : sp.pairs) ++profile_counts[{p.subset.size(), p.subset.diameter()}];
  for (const auto& [profile, count] : profile_counts) {
    const auto [degree, diameter] = profile;
    std::size_t expected_count = 0;
    for (const auto& s : enumerate_local_subsets(degree, q, d))
      if (s.diameter() == diameter) ++expected_count;
    CHECK(count == expected_count);
  }
}

TEST_CASE("linear kappa: only the degree-1 eigenvalues survive, each 1/d") {
  const int d = 6, q = 2;
  const InnerFunction linear = InnerFunction::polynomial({0.0, 1.0});
  const Spectrum sp = full_spectrum(d, q, linear);
  for (const auto& p : sp.pairs) {
    if (p.subset.size() == 1)
      CHECK(p.eigenvalue == doctest::Approx(1.0 / d).epsilon(1e-14));
    else
      CHECK(std::abs(p.eigenvalue) < 1e-14);
  }
  const std::vector<double> brute = brute_force_spectrum(d, q, linear);
  for (int i = 0; i < d; ++i) CHECK(brute[static_cast<std::size_t>(i)] == doctest::Approx(1.0 / d).epsilon(1e-12));
  CHECK(std::abs(brute[static_cast<std::size_t>(d)]) < 1e-12);
}

TEST_CASE("kernel_eval equals the eigen-expansion on random pairs") {
  const int d = 10, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const PointList pts = sample_points(10, d, 31);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i; j < pts.size(); ++j)
      CHECK(std::abs(kernel_eval(kernel, pts[i], pts[j]) - expansion_eval(sp, pts[i], pts[j])) <= 1e-10);
}

TEST_CASE("select_truncation") {
  const Spectrum sp = full_spectrum(16, 4, kExp);
  // no eigenvalue qualifies
  CHECK(select_truncation(sp, 1, 1e9) == 0);
  // every eigenvalue qualifies at huge n
  CHECK(select_truncation(sp, 1u << 30, 0.0) == sp.size());
  // independent scan oracle with block extension
  for (double ridge : {0.0, 1.0, 16.0}) {
    const std::size_t n = 256;
    const std::size_t m = select_truncation(sp, n, ridge);
    const double threshold = std::max(ridge, 1.0);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < sp.size(); ++i)
      if (static_cast<double>(n) * sp.pairs[i].eigenvalue >= threshold) expected = i + 1;
    while (expected > 0 && expected < sp.size() &&
           sp.pairs[expected].eigenvalue == sp.pairs[expected - 1].eigenvalue)
      ++expected;
    CHECK(m == expected);
    if (m > 0 && m < sp.size()) CHECK(sp.pairs[m].eigenvalue < sp.pairs[m - 1].eigenvalue);
  }
}

TEST_CASE("feature_bundle: split identity and edge cases") {
  const int d = 10, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const PointList pts = sample_points(50, d, 17);
  const ConvKernel kernel{d, q, kExp};
  const Eigen::MatrixXd k = gram(kernel, pts);

  for (std::size_t m : {std::size_t{0}, std::size_t{11}, sp.size()}) {
    const FeatureBundle b = feature_bundle(sp, pts, m);
    CHECK(b.p_low.cols() == static_cast<Eigen::Index>(m));
    if (m > 0) CHECK((b.p_low.array().abs() == 1.0).all());
    const Eigen::MatrixXd sum = b.gram_low + b.gram_high;
    CHECK((sum - k).cwiseAbs().maxCoeff() <= 1e-10);
    if (m == 0) CHECK((b.gram_high - k).cwiseAbs().maxCoeff() <= 1e-12);
    if (m == sp.size()) CHECK(b.gram_high.cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK_THROWS_AS(feature_bundle(sp, pts, sp.size() + 1), std::invalid_argument);
  CHECK_THROWS_AS(feature_bundle(sp, pts, 1, /*entry_cap=*/10), ResourceLimitError);
}

TEST_CASE("squared kernel: window evaluation equals the feature expansion") {
  const int d = 11, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const PointList pts = sample_points(20, d, 23);
  // direct P D^2 P^T via the m = 0 tail of the bundle
  const FeatureBundle b = feature_bundle(sp, pts, 0);
  const Eigen::MatrixXd s = sq_gram(sp, pts);
  CHECK((s - b.sq_gram_high).cwiseAbs().maxCoeff() <= 1e-12);
  // diagonal is the sum of squared eigenvalues
  double sum_sq = 0.0;
  for (const auto& p : sp.pairs) sum_sq += p.eigenvalue * p.eigenvalue;
  for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(s(i, i) == doctest::Approx(sum_sq).epsilon(1e-12));
}

TEST_CASE("squared kernel matches Monte-Carlo spot entries") {
  const int d = 10, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const ConvKernel kernel{d, q, kExp};
  const PointList pts = sample_points(4, d, 29);
  const std::size_t draws = 10000;
  const PointList zs = sample_points(draws, d, 777);
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a; b < pts.size(); ++b) {
      double sum = 0.0, sum_sq = 0.0;
      for (const auto& z : zs) {
        const double v = kernel_eval(kernel, pts[a], z) * kernel_eval(kernel, z, pts[b]);
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / static_cast<double>(draws);
      const double var = (sum_sq - draws * mean * mean) / (static_cast<double>(draws) - 1.0);
      const double se = std::sqrt(std::max(var, 0.0) / static_cast<double>(draws));
      const double exact = sq_kernel_eval(d, q, sp.xi, pts[a], pts[b]);
      CHECK(std::abs(exact - mean) <= 4.0 * se + 1e-12);
    }
}

TEST_CASE("diagnostics: m = 0 and scalar ordering") {
  const int d = 10, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const PointList pts = sample_points(60, d, 41);
  const FeatureBundle b0 = feature_bundle(sp, pts, 0);
  const DiagnosticsReport rep0 = diagnostics(b0, 2.0);
  CHECK(rep0.concentration_norm == 0.0);
  CHECK(rep0.tau1 == 1.0);
  CHECK(rep0.condition_ok);

  for (std::size_t m : {std::size_t{1}, std::size_t{11}}) {
    for (double ridge : {0.0, 1.0, 8.0}) {
      const DiagnosticsReport rep = diagnostics(feature_bundle(sp, pts, m), ridge);
      CHECK(rep.r1 <= rep.r2);
      CHECK(rep.tau1 <= 1.0);
      CHECK(rep.tau2 >= 1.0);
      if (rep.tau1 > 0.0) CHECK(rep.tau1 > 0.0);
    }
  }
}

TEST_CASE("concentration norm drops below 1/2 for n >> m") {
  const int d = 12, q = 3;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const std::size_t m = 9;
  const std::size_t n = 2000;
  std::size_t ok = 0;
  const std::size_t n_seeds = 20;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const PointList pts = sample_points(n, d, 100 + s);
    Eigen::MatrixXd p(n, m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i)
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            static_cast<double>(monomial_eval(sp.pairs[j].subset, pts[i]));
    Eigen::MatrixXd c = p.transpose() * p / static_cast<double>(n);
    c -= Eigen::MatrixXd::Identity(c.rows(), c.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
    const double norm = std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
    if (norm < 0.5) ++ok;
  }
  CHECK(ok >= 19);  // expected >= 95% of seeds
}

TEST_CASE("one_two_split") {
  const int d = 16, q = 4;
  const Spectrum sp = full_spectrum(d, q, kExp);
  const PointList pts = sample_points(40, d, 51);
  const ConvKernel kernel{d, q, kExp};

  // ell = 2, beta = 0.5: Lbar = 2, I2 = degrees >= 4
  const std::size_t m = select_truncation(sp, 256, 1.0);
  const OneTwoSplit split = one_two_split(sp, pts, m, 2.0, 0.5);
  CHECK(split.l_bar == 2);
  for (std::size_t i : split.i1) {
    CHECK(i >= m);
    CHECK(sp.pairs[i].subset.size() <= split.l_bar + 1);
  }
  for (std::size_t i : split.i2) CHECK(sp.pairs[i].subset.size() >= split.l_bar + 2);
  if (split.union_ok) {
    const FeatureBundle b = feature_bundle(sp, pts, m);
    CHECK((split.k1 + split.k2 - b.gram_high).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK(split.m_bar == (split.i2.empty() ? 0 : split.i2.front() + 1));

  // large Lbar: I2 empty, K1 = K_{>0} = K at m = 0
  const OneTwoSplit all_low = one_two_split(sp, pts, 0, 10.0, 0.5);
  CHECK(all_low.i2.empty());
  CHECK(all_low.union_ok);
  CHECK((all_low.k2.cwiseAbs().maxCoeff()) == 0.0);
  CHECK((all_low.k1 - gram(kernel, pts)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("Q_l diagonal is exactly 1") {
  const int d = 16, q = 5;
  const PointList pts = sample_points(3, d, 61);
  for (const auto& x : pts)
    for (int l = 0; l <= q; ++l) CHECK(std::abs(q_kernel_eval(d, q, l, x, x) - 1.0) <= 1e-12);
}

TEST_CASE("eigendecay sanity: per-degree envelopes stable across q at fixed d/q") {
  // For fixed degree below T, max_S lambda_S ~ 1/(d q^(l-1)) and
  // min_S lambda_S ~ 1/(d q^l); measured constants should move by < 2x
  // across q in {8, 16, 32} at fixed d/q.
  const int ratio = 5;
  for (int degree : {1, 2, 3}) {
    std::vector<double> upper_constants, lower_constants;
    for (int q : {8, 16, 32}) {
      const int d = ratio * q;
      const XiCoefficients xi = xi_coefficients(kExp, q);
      const double lam_max = conv_eigenvalue(xi, d, degree, degree);  // tightest window
      const double lam_min = conv_eigenvalue(xi, d, degree, q);       // widest window
      upper_constants.push_back(lam_max * d * std::pow(q, degree - 1));
      lower_constants.push_back(lam_min * d * std::pow(q, degree));
    }
    for (const auto& constants : {upper_constants, lower_constants}) {
      const double lo = *std::min_element(constants.begin(), constants.end());
      const double hi = *std::max_element(constants.begin(), constants.end());
      CHECK(hi / lo < 2.0);
    }
  }
}
