#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "spreg/copcar.hpp"
#include "spreg/glm.hpp"
#include "spreg/stats.hpp"

using namespace spreg;

TEST_CASE("car_marginals equal the diagonal of the dense inverse") {
  const ArealGraph g = build_lattice(4, 4);
  for (double rho : {0.3, 0.8, 0.95}) {
    const Eigen::MatrixXd Q = car_precision(g, rho);
    const Eigen::MatrixXd Qinv = Q.inverse();
    const CarMarginals m = car_marginals(g, rho);
    REQUIRE(m.sigma2.size() == g.n);
    for (int i = 0; i < g.n; ++i) {
      CHECK(m.sigma2(i) > 0.0);
      CHECK(m.sigma2(i) == doctest::Approx(Qinv(i, i)).epsilon(1e-8));
    }
  }
}

TEST_CASE("cml matches a quadrature recomputation on a 3x3 lattice") {
  const ArealGraph g = build_lattice(3, 3);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  CopParams params;
  params.beta = Eigen::VectorXd(2);
  params.beta << 0.2, 1.0;
  params.rho = 0.7;
  Eigen::VectorXd z(g.n);
  z << 1, 0, 1, 1, 0, 0, 1, 1, 0;

  const Eigen::MatrixXd Q = car_precision(g, params.rho);
  const Eigen::MatrixXd Qinv = Q.inverse();
  const Eigen::VectorXd eta = X * params.beta;

  // Rectangle probability for one pair by composite Simpson on the latent
  // scale, clipped at +-9 standard deviations.
  const auto pair_quad = [&](int i, int j, double zi, double zj) {
    const double pi_ = logistic(eta(i)), pj = logistic(eta(j));
    const double hi = norm_quantile(1.0 - pi_), hj = norm_quantile(1.0 - pj);
    const double r = Qinv(i, j) / std::sqrt(Qinv(i, i) * Qinv(j, j));
    // z=0 corresponds to v <= h, z=1 to v > h.
    const double ai = zi > 0.5 ? hi : -9.0;
    const double bi = zi > 0.5 ? 9.0 : hi;
    const double aj = zj > 0.5 ? hj : -9.0;
    const double bj = zj > 0.5 ? 9.0 : hj;
    const int m = 801;
    const double sx = (bi - ai) / (m - 1), sy = (bj - aj) / (m - 1);
    const double det = 1.0 - r * r;
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
    double total = 0.0;
    for (int a = 0; a < m; ++a) {
      const double wx = sx / 3.0 * (a == 0 || a == m - 1 ? 1.0 : (a % 2 ? 4.0 : 2.0));
      const double x = ai + sx * a;
      for (int b = 0; b < m; ++b) {
        const double wy = sy / 3.0 * (b == 0 || b == m - 1 ? 1.0 : (b % 2 ? 4.0 : 2.0));
        const double y = aj + sy * b;
        total += wx * wy * norm * std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * det));
      }
    }
    return total;
  };

  double expect = 0.0;
  for (const auto& [i, j] : g.edges) expect += std::log(pair_quad(i, j, z(i), z(j)));
  const double got = cml(params, z, g, X, CmlPairs::adjacent);
  CHECK(got == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("adjacent pair probabilities sum to one over the four outcomes") {
  const ArealGraph g = build_lattice(2, 2);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(g.n, 1);
  CopParams params;
  params.beta = Eigen::VectorXd::Constant(1, 0.4);
  params.rho = 0.5;
  // For a fixed edge, exp(pair term) summed over the 4 joint outcomes = 1.
  // Use single-edge graphs derived from each lattice edge.
  for (const auto& [i, j] : g.edges) {
    double total = 0.0;
    for (double zi : {0.0, 1.0}) {
      for (double zj : {0.0, 1.0}) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(g.n);
        z(i) = zi;
        z(j) = zj;
        ArealGraph single = g;
        single.edges = {{std::min(i, j), std::max(i, j)}};
        total += std::exp(cml(params, z, single, X, CmlPairs::adjacent));
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("simulate_copcar determinism and marginal sanity") {
  const ArealGraph g = build_lattice(5, 5);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  CopParams params;
  params.beta = Eigen::VectorXd(2);
  params.beta << 0.2, 1.0;
  params.rho = 0.9;
  const Eigen::VectorXd a = simulate_copcar(params, g, X, 31);
  const Eigen::VectorXd b = simulate_copcar(params, g, X, 31);
  CHECK(a == b);
  // Values are binary.
  for (int i = 0; i < g.n; ++i) CHECK((a(i) == 0.0 || a(i) == 1.0));
  // Long-run marginal means approach the Bernoulli marginals (loose MC bound;
  // the tight 3-se version lives in the acceptance suite).
  const int reps = 2000;
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(g.n);
  for (int k = 0; k < reps; ++k) freq += simulate_copcar(params, g, X, 1000 + k);
  freq /= reps;
  for (int i = 0; i < g.n; ++i) {
    const double p = logistic(X.row(i).dot(params.beta));
    CHECK(std::abs(freq(i) - p) < 5.0 * std::sqrt(p * (1 - p) / reps));
  }
}

TEST_CASE("simulate_gamma_poisson produces counts with roughly correct means") {
  const ArealGraph g = build_lattice(5, 5);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(g.n, 1);
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 1.0);  // mu = e
  const int reps = 1500;
  double mean = 0.0;
  for (int k = 0; k < reps; ++k)
    mean += simulate_gamma_poisson(beta, 2.0, g, X, 0.8, 500 + k).mean();
  mean /= reps;
  CHECK(mean == doctest::Approx(std::exp(1.0)).epsilon(0.05));
}

TEST_CASE("fit_cml recovers parameters and reports rho in [0,1)") {
  const ArealGraph g = build_lattice(12, 12);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  CopParams truth;
  truth.beta = Eigen::VectorXd(2);
  truth.beta << 0.2, 1.0;
  truth.rho = 0.9;
  const Eigen::VectorXd z = simulate_copcar(truth, g, X, 77);
  const FitResult fit = fit_cml(z, g, X, 60, 5);
  CHECK(fit.converged);
  CHECK(fit.extras.at("rho") >= 0.0);
  CHECK(fit.extras.at("rho") < 1.0);
  CHECK(std::abs(fit.estimate("beta1") - 1.0) < 1.5);
  // p_hat is the marginal logistic surface.
  for (int i = 0; i < g.n; ++i)
    CHECK(fit.p_hat(i) ==
          doctest::Approx(logistic(fit.estimate("beta0") + fit.estimate("beta1") * X(i, 1)))
              .epsilon(1e-10));
}
