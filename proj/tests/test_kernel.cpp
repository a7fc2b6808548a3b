#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "convkernel/errors.hpp"
#include "convkernel/kernel.hpp"

using namespace convkernel;

TEST_CASE("inner function variants and parsing") {
  CHECK(InnerFunction::exponential()(0.5) == std::exp(0.5));
  CHECK(InnerFunction::gaussian_rbf(2.0)(1.0) == 1.0);
  CHECK(InnerFunction::gaussian_rbf(2.0)(-1.0) == std::exp(-1.0));
  CHECK(InnerFunction::polynomial({1.0, 2.0, 3.0})(0.5) == doctest::Approx(1.0 + 1.0 + 0.75));
  CHECK(InnerFunction::parse("exp")(1.0) == std::exp(1.0));
  CHECK(InnerFunction::parse("rbf:0.5")(0.0) == std::exp(-2.0));
  CHECK(InnerFunction::parse("poly:1,0,2")(0.5) == doctest::Approx(1.5));
  CHECK(InnerFunction::parse(InnerFunction::gaussian_rbf(0.25).to_string())(0.3) ==
        InnerFunction::gaussian_rbf(0.25)(0.3));
  CHECK_THROWS_AS(InnerFunction::parse("nope"), std::invalid_argument);
  CHECK_THROWS_AS(InnerFunction::gaussian_rbf(0.0), std::invalid_argument);
}

TEST_CASE("krawtchouk values") {
  for (int q = 1; q <= 8; ++q)
    for (int k = 0; k <= q; ++k) {
      CHECK(krawtchouk_exact(0, k, q) == 1);
      CHECK(krawtchouk_exact(1, k, q) == q - 2 * k);
    }
  CHECK(krawtchouk_exact(2, 1, 4) == 0);  // binom(3,2) - binom(1,1)binom(3,1)

  // brute-force oracle: sum of Y_S(z) over |S| = l for z with k entries -1
  for (int q = 2; q <= 7; ++q)
    for (int k = 0; k <= q; ++k)
      for (int l = 0; l <= q; ++l) {
        long long brute = 0;
        // iterate subsets of {0..q-1} of size l via bitmasks
        for (unsigned mask = 0; mask < (1u << q); ++mask) {
          if (__builtin_popcount(mask) != l) continue;
          int prod = 1;
          for (int i = 0; i < q; ++i)
            if (mask & (1u << i)) prod *= (i < k ? -1 : 1);
          brute += prod;
        }
        CHECK(krawtchouk_exact(l, k, q) == brute);
      }

  // large-q recurrence path stays consistent with the exact one at q = 62
  for (int l : {0, 1, 5, 17}) {
    const double exact = static_cast<double>(krawtchouk_exact(l, 20, 62));
    CHECK(krawtchouk(l, 20, 62) == exact);
  }
}

TEST_CASE("binomials") {
  CHECK(binomial_exact(10, 3) == 120);
  CHECK(binomial_exact(62, 31) > 0);
  CHECK_THROWS_AS(binomial_exact(63, 31), NumericOverflowError);
  CHECK(binomial(70, 35) == doctest::Approx(std::exp(log_binomial(70, 35))));
}

TEST_CASE("xi coefficients: degenerate and closed-form cases") {
  // constant kappa: only xi_0
  const XiCoefficients xi_const = xi_coefficients(InnerFunction::constant(1.0), 5);
  CHECK(xi_const.values[0] == doctest::Approx(1.0).epsilon(1e-14));
  for (int l = 1; l <= 5; ++l) CHECK(std::abs(xi_const.values[static_cast<std::size_t>(l)]) < 1e-14);

  // linear kappa: only xi_1 = 1
  const XiCoefficients xi_lin = xi_coefficients(InnerFunction::polynomial({0.0, 1.0}), 6);
  CHECK(xi_lin.values[1] == doctest::Approx(1.0).epsilon(1e-14));
  for (int l : {0, 2, 3, 4, 5, 6}) CHECK(std::abs(xi_lin.values[static_cast<std::size_t>(l)]) < 1e-14);

  // exponential: xi_0 = cosh(1/q)^q, and sum xi_l = kappa(1) = e
  const XiCoefficients xi_exp = xi_coefficients(InnerFunction::exponential(), 4);
  CHECK(xi_exp.values[0] == doctest::Approx(std::pow(std::cosh(0.25), 4)).epsilon(1e-14));
  CHECK(xi_exp.sum() == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
}

TEST_CASE("xi reconstruction identity across variants") {
  const InnerFunction variants[] = {InnerFunction::exponential(), InnerFunction::gaussian_rbf(0.7),
                                    InnerFunction::polynomial({0.2, -0.4, 0.3, 0.1})};
  for (const auto& inner : variants)
    for (int q = 1; q <= 12; ++q)
      CHECK(xi_coefficients(inner, q).max_reconstruction_error(inner) <= 1e-10);
}

TEST_CASE("kernel_eval basics") {
  const PointList pts = sample_points(6, 10, 5);
  const ConvKernel kernel{10, 3, InnerFunction::exponential()};
  // K(x,x) = kappa(1)
  for (const auto& x : pts) CHECK(kernel_eval(kernel, x, x) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  // symmetry
  CHECK(kernel_eval(kernel, pts[0], pts[1]) == kernel_eval(kernel, pts[1], pts[0]));
  // q = d: every window sees the full inner product
  const ConvKernel full{10, 10, InnerFunction::exponential()};
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    int dot = 0;
    for (int j = 0; j < 10; ++j)
      dot += pts[i].coords[static_cast<std::size_t>(j)] * pts[i + 1].coords[static_cast<std::size_t>(j)];
    CHECK(kernel_eval(full, pts[i], pts[i + 1]) ==
          doctest::Approx(std::exp(dot / 10.0)).epsilon(1e-14));
  }
}

TEST_CASE("kernel_eval matches the direct window definition and is shift invariant") {
  const int d = 11, q = 4;
  const ConvKernel kernel{d, q, InnerFunction::gaussian_rbf(1.0)};
  const PointList pts = sample_points(8, d, 21);
  auto direct = [&](const HypercubePoint& x, const HypercubePoint& y) {
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
      int dot = 0;
      for (int i = 0; i < q; ++i) {
        const int idx = (k + i) % d;
        dot += x.coords[static_cast<std::size_t>(idx)] * y.coords[static_cast<std::size_t>(idx)];
      }
      acc += kernel.inner(static_cast<double>(dot) / q);
    }
    return acc / d;
  };
  auto shift = [&](const HypercubePoint& x) {
    HypercubePoint out = x;
    for (int i = 0; i < d; ++i) out.coords[static_cast<std::size_t>((i + 1) % d)] = x.coords[static_cast<std::size_t>(i)];
    return out;
  };
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      CHECK(kernel_eval(kernel, pts[i], pts[j]) == doctest::Approx(direct(pts[i], pts[j])).epsilon(1e-14));
      CHECK(kernel_eval(kernel, shift(pts[i]), shift(pts[j])) ==
            doctest::Approx(kernel_eval(kernel, pts[i], pts[j])).epsilon(1e-13));
    }
}

TEST_CASE("gram: shape, symmetry, PSD for nonnegative xi") {
  const int d = 8, q = 3;
  const ConvKernel kernel{d, q, InnerFunction::exponential()};
  const PointList single = sample_points(1, d, 2);
  const Eigen::MatrixXd one = gram(kernel, single);
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == doctest::Approx(std::exp(1.0)));

  const PointList pts = sample_points(40, d, 2);
  const Eigen::MatrixXd k = gram(kernel, pts);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const XiCoefficients xi = xi_coefficients(kernel.inner, q);
  for (double v : xi.values) CHECK(v >= 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9);
}

TEST_CASE("regularity report") {
  const RegularityReport rep = regularity_report(InnerFunction::exponential(), 8, 2.0, 0.5);
  CHECK(rep.t == 20);
  CHECK(rep.min_all_xi >= 0.0);
  CHECK(rep.min_low_degree_xi >= 0.0);
  CHECK(rep.tail_products.size() == 9);  // l = 0..min(T,q)=8
  CHECK(rep.xi_sum == doctest::Approx(std::exp(1.0)).epsilon(1e-12));

  const RegularityReport degenerate = regularity_report(InnerFunction::constant(1.0), 6, 2.0, 0.5);
  CHECK(degenerate.min_low_degree_xi == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("gram serialization round trip") {
  const ConvKernel kernel{9, 3, InnerFunction::exponential()};
  const Eigen::MatrixXd k = gram(kernel, sample_points(7, 9, 3));
  const std::string bytes = gram_to_binary(k);
  CHECK(bytes.size() == 16 + 7 * 7 * 8);
  const Eigen::MatrixXd back = gram_from_binary(bytes);
  CHECK((back - k).cwiseAbs().maxCoeff() == 0.0);
  const std::string csv = gram_to_csv(k);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
