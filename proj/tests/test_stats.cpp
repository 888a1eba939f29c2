#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "spreg/stats.hpp"

using namespace spreg;

namespace {
const double inf = std::numeric_limits<double>::infinity();

// Midpoint-free Gauss-Legendre quadrature oracle for the bivariate normal
// rectangle P(U <= h, V <= k), integrating the density over [-9, h] x [-9, k].
double bvn_quadrature(double h, double k, double r, int nodes = 400) {
  h = std::min(h, 9.0);
  k = std::min(k, 9.0);
  const double lo = -9.0;
  if (h <= lo || k <= lo) return 0.0;
  // Composite Simpson on each axis.
  const int m = nodes | 1;  // odd count
  auto grid = [&](double hi) {
    std::vector<double> g(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (m - 1);
    return g;
  };
  auto weights = [&](double hi) {
    std::vector<double> w(static_cast<std::size_t>(m));
    const double step = (hi - lo) / (m - 1);
    for (int i = 0; i < m; ++i)
      w[static_cast<std::size_t>(i)] = step / 3.0 * (i == 0 || i == m - 1 ? 1.0 : (i % 2 ? 4.0 : 2.0));
    return w;
  };
  const auto gx = grid(h), wx = weights(h);
  const auto gy = grid(k), wy = weights(k);
  const double det = 1.0 - r * r;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double x = gx[static_cast<std::size_t>(i)], y = gy[static_cast<std::size_t>(j)];
      total += wx[static_cast<std::size_t>(i)] * wy[static_cast<std::size_t>(j)] * norm *
               std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * det));
    }
  return total;
}
}  // namespace

TEST_CASE("norm_cdf matches known values and symmetry") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(norm_cdf(-1.0) + norm_cdf(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(norm_cdf(8.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("norm_quantile inverts norm_cdf across the range") {
  for (double p : {1e-10, 1e-6, 0.025, 0.3, 0.5, 0.7, 0.975, 1 - 1e-6}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(norm_quantile(0.5) == doctest::Approx(0.0));
  CHECK(norm_quantile(0.0) == -inf);
  CHECK(norm_quantile(1.0) == inf);
}

TEST_CASE("bvn_cdf closed forms") {
  // Independence: product of marginals.
  for (double h : {-1.3, 0.0, 0.7})
    for (double k : {-0.4, 1.9})
      CHECK(bvn_cdf(h, k, 0.0) == doctest::Approx(norm_cdf(h) * norm_cdf(k)).epsilon(1e-12));
  // Orthant probability: P(U<=0, V<=0) = 1/4 + asin(r)/(2 pi).
  for (double r : {-0.9, -0.3, 0.0, 0.5, 0.95}) {
    const double expect = 0.25 + std::asin(r) / (2.0 * std::numbers::pi);
    CHECK(bvn_cdf(0.0, 0.0, r) == doctest::Approx(expect).epsilon(1e-10));
  }
  // Marginal reduction at infinity.
  CHECK(bvn_cdf(0.3, inf, 0.6) == doctest::Approx(norm_cdf(0.3)).epsilon(1e-12));
  CHECK(bvn_cdf(inf, -0.8, -0.4) == doctest::Approx(norm_cdf(-0.8)).epsilon(1e-12));
  CHECK(bvn_cdf(-inf, 0.8, 0.4) == doctest::Approx(0.0));
  CHECK(bvn_cdf(inf, inf, 0.7) == doctest::Approx(1.0));
  CHECK_THROWS(bvn_cdf(0.0, 0.0, 1.0));
}

TEST_CASE("bvn_cdf agrees with quadrature") {
  for (double r : {-0.85, -0.2, 0.35, 0.9}) {
    for (double h : {-1.5, 0.2, 2.0}) {
      for (double k : {-0.7, 1.1}) {
        CHECK(bvn_cdf(h, k, r) == doctest::Approx(bvn_quadrature(h, k, r)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("gamma_quantile shape/rate conventions") {
  // Exponential(rate) median = ln 2 / rate.
  CHECK(gamma_quantile(0.5, 1.0, 2.0) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-12));
  // Chi-square_1 = gamma(0.5, rate 0.5); 95th percentile = 3.841458820694124.
  CHECK(gamma_quantile(0.95, 0.5, 0.5) == doctest::Approx(3.841458820694124).epsilon(1e-10));
  CHECK_THROWS(gamma_quantile(-0.1, 1.0, 1.0));
}

TEST_CASE("p-values") {
  CHECK(z_pvalue_two_sided(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(z_pvalue_two_sided(0.0) == doctest::Approx(1.0));
  // t with large df approaches normal.
  CHECK(t_pvalue_two_sided(1.96, 1e7) == doctest::Approx(z_pvalue_two_sided(1.96)).epsilon(1e-4));
  // t_2 at t=4.302652729911275 gives p = 0.05.
  CHECK(t_pvalue_two_sided(4.302652729911275, 2.0) == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("empirical quantile and median") {
  std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  CHECK(median(v) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(median(std::vector<double>{7.0}) == doctest::Approx(7.0));
  CHECK_THROWS(median(std::vector<double>{}));
}

TEST_CASE("correlation") {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 2, 4, 6, 8;
  CHECK(correlation(a, a) == doctest::Approx(1.0));
  CHECK(correlation(a, b) == doctest::Approx(1.0));
  b << -1, -2, -3, -4;
  CHECK(correlation(a, b) == doctest::Approx(-1.0));
}

TEST_CASE("welch t test matches direct computation") {
  const std::vector<double> a{1.1, 2.3, 2.9, 3.6, 1.8};
  const std::vector<double> b{4.0, 5.2, 4.8, 6.1};
  const WelchResult w = welch_t_test(a, b);
  // Direct formulas.
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  };
  auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  const double se2 = var(a) / a.size() + var(b) / b.size();
  const double t = (mean(a) - mean(b)) / std::sqrt(se2);
  const double df = se2 * se2 / (std::pow(var(a) / a.size(), 2) / (a.size() - 1) +
                                 std::pow(var(b) / b.size(), 2) / (b.size() - 1));
  CHECK(w.t == doctest::Approx(t).epsilon(1e-12));
  CHECK(w.df == doctest::Approx(df).epsilon(1e-12));
  CHECK(w.p == doctest::Approx(t_pvalue_two_sided(t, df)).epsilon(1e-12));
  CHECK_THROWS(welch_t_test({1.0}, b));
}
