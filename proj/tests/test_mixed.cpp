#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "spreg/mixed.hpp"
#include "spreg/moran.hpp"
#include "spreg/rng.hpp"
#include "spreg/stats.hpp"

using namespace spreg;

TEST_CASE("tau_full_conditional") {
  // eta = 0: posterior shape shifts by q/2, rate is the prior rate.
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3);
  GammaParams g = tau_full_conditional(eta, P, 0.5, 2000.0);
  CHECK(g.shape == doctest::Approx(0.5 + 1.5));
  CHECK(g.rate == doctest::Approx(1.0 / 2000.0));
  // Scalar arithmetic example: q=1, penalty=1, eta=2 -> rate 1/2000 + 2.
  eta = Eigen::VectorXd::Constant(1, 2.0);
  P = Eigen::MatrixXd::Identity(1, 1);
  g = tau_full_conditional(eta, P, 0.5, 2000.0);
  CHECK(g.shape == doctest::Approx(1.0));
  CHECK(g.rate == doctest::Approx(1.0 / 2000.0 + 2.0).epsilon(1e-14));
}

TEST_CASE("tau Gibbs recovers the prior (Geweke-style successive-conditional test)") {
  // Alternate eta | tau ~ N(0, (tau P)^{-1}) and tau | eta; the tau margin
  // must stay at the gamma(0.5, scale 2000) prior.
  const int q = 4;
  Eigen::MatrixXd P(q, q);
  P.setZero();
  P.diagonal() << 1.0, 2.0, 3.0, 4.0;
  Rng rng(123);
  double tau = 1.0;
  const int iters = 40000;
  std::vector<double> logs;
  logs.reserve(iters);
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd eta(q);
    for (int j = 0; j < q; ++j) eta(j) = rng.normal() / std::sqrt(tau * P(j, j));
    const GammaParams g = tau_full_conditional(eta, P, 0.5, 2000.0);
    tau = rng.gamma(g.shape, g.rate);
    logs.push_back(std::log(tau));
  }
  // Reference moments of log tau under gamma(shape 0.5, scale 2000):
  // E = digamma(0.5) + log(2000), Var = trigamma(0.5).
  const double expect_mean = -1.9635100260214235 + std::log(2000.0);
  const double expect_var = 4.934802200544679;
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= iters;
  // Batch-means standard error to absorb autocorrelation.
  const int batches = 40, bs = iters / batches;
  std::vector<double> bm(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (int i = 0; i < bs; ++i) bm[static_cast<std::size_t>(b)] += logs[static_cast<std::size_t>(b * bs + i)];
    bm[static_cast<std::size_t>(b)] /= bs;
  }
  double bvar = 0.0;
  for (double v : bm) bvar += (v - mean) * (v - mean);
  bvar /= (batches - 1);
  const double se = std::sqrt(bvar / batches);
  const double zstat = (mean - expect_mean) / se;
  CHECK(z_pvalue_two_sided(zstat) > 0.01);
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= iters;
  CHECK(var == doctest::Approx(expect_var).epsilon(0.1));
}

TEST_CASE("decomposition identity") {
  const ArealGraph g = build_lattice(5, 5);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  std::mt19937_64 mt(9);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd beta(2), psi(g.n);
    beta << nd(mt), nd(mt);
    for (int i = 0; i < g.n; ++i) psi(i) = nd(mt);
    CHECK(decomposition_check(X, beta, psi) < 1e-10);
  }
  // psi in C(X): residual part vanishes, delta = beta + c.
  Eigen::VectorXd c(2);
  c << 0.7, -0.3;
  const Eigen::VectorXd psi_col = X * c;
  CHECK(decomposition_check(X, Eigen::VectorXd::Zero(2), psi_col) < 1e-10);
}

TEST_CASE("basis sampler fits and respects the RSR orthogonality invariant") {
  const ArealGraph g = build_lattice(8, 8);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  Rng rng(4);
  Eigen::VectorXd z(g.n);
  for (int i = 0; i < g.n; ++i)
    z(i) = rng.bernoulli(logistic(0.2 + X(i, 1) + g.coord_y(i))) ? 1.0 : 0.0;
  MixedModelSpec spec;
  spec.kind = MixedKind::rsr;
  spec.q = 15;
  const PosteriorSamples s = fit_basis_mcmc(z, g, X, spec, 6000, 2000, 17);
  CHECK(s.beta_draws.rows() == (6000 - 2000) / spec.thin);
  CHECK(s.tau_draws.minCoeff() > 0.0);
  CHECK(s.p_hat.minCoeff() > 0.0);
  CHECK(s.p_hat.maxCoeff() < 1.0);
  const Eigen::VectorXd eta_bar = s.effect_draws.colwise().mean();
  const Eigen::VectorXd fitted = s.basis * eta_bar;
  CHECK((X.transpose() * fitted).lpNorm<Eigen::Infinity>() <=
        1e-6 * std::max(1.0, eta_bar.norm()));
  // Determinism.
  const PosteriorSamples s2 = fit_basis_mcmc(z, g, X, spec, 6000, 2000, 17);
  CHECK(s.beta_draws == s2.beta_draws);

  // Shared basis context gives identical chains.
  const BasisContext ctx = make_basis_context(g, X, MixedKind::rsr, 20);
  const PosteriorSamples s3 = fit_basis_mcmc(z, g, X, spec, 6000, 2000, 17, &ctx);
  CHECK(s.beta_draws == s3.beta_draws);
}

TEST_CASE("posterior_summary quantiles and adjusted draws") {
  PosteriorSamples s;
  const int k = 2000;
  s.beta_draws.resize(k, 2);
  Rng rng(8);
  for (int i = 0; i < k; ++i) {
    s.beta_draws(i, 0) = rng.normal();
    s.beta_draws(i, 1) = 2.0 + 0.5 * rng.normal();
  }
  s.tau_draws = Eigen::VectorXd::Constant(k, 1.0);
  s.effect_draws.resize(k, 0);
  s.basis.resize(5, 0);
  s.p_hat = Eigen::VectorXd::Constant(5, 0.5);
  s.spec.kind = MixedKind::rsr;
  const FitResult fit = posterior_summary(s);
  CHECK(fit.estimate("beta1") == doctest::Approx(2.0).epsilon(0.05));
  std::vector<double> col(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) col[static_cast<std::size_t>(i)] = s.beta_draws(i, 1);
  CHECK(fit.interval("beta1").lower == doctest::Approx(quantile(col, 0.025)));
  CHECK(fit.interval("beta1").upper == doctest::Approx(quantile(col, 0.975)));

  // Adjusted draws only widen the interval.
  const ArealGraph g = build_lattice(3, 3);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  PosteriorSamples sa = s;
  sa.p_hat = Eigen::VectorXd::Constant(g.n, 0.5);
  adjusted_beta(sa, X, g, 99);
  REQUIRE(sa.beta_tilde_draws.rows() == k);
  const FitResult adj = posterior_summary(sa);
  CHECK(adj.method == "rsr_adjusted");
  CHECK(adj.interval("beta1").width() >= fit.interval("beta1").width());
}

TEST_CASE("Gaussian conjugate Gibbs matches the closed-form posterior") {
  // Short-chain version; the tighter 3-se check lives in the acceptance suite.
  const ArealGraph g = build_lattice(4, 4);
  Eigen::MatrixXd X(g.n, 2);
  X.col(0).setOnes();
  X.col(1) = g.coord_x;
  MixedModelSpec spec;
  spec.kind = MixedKind::car;
  spec.rho_fixed = true;
  spec.rho_value = 0.5;
  const double noise_var = 0.5, tau = 2.0;
  Rng rng(5);
  Eigen::VectorXd y(g.n);
  for (int i = 0; i < g.n; ++i) y(i) = 0.3 + X(i, 1) + std::sqrt(noise_var) * rng.normal();
  const PosteriorSamples s =
      fit_car_gauss_gibbs(y, g, X, spec, noise_var, tau, 20000, 2000, 31);
  // Closed form: joint Gaussian in (beta, psi).
  const Eigen::MatrixXd Q = car_precision(g, spec.rho_value);
  const int n = g.n, p = 2;
  Eigen::MatrixXd prec(n + p, n + p);
  prec.topLeftCorner(p, p) = X.transpose() * X / noise_var;
  prec.topLeftCorner(p, p).diagonal().array() += 1.0 / spec.prior_beta_var;
  prec.topRightCorner(p, n) = X.transpose() / noise_var;
  prec.bottomLeftCorner(n, p) = X / noise_var;
  prec.bottomRightCorner(n, n) = tau * Q + Eigen::MatrixXd::Identity(n, n) / noise_var;
  Eigen::VectorXd rhs(n + p);
  rhs.head(p) = X.transpose() * y / noise_var;
  rhs.tail(n) = y / noise_var;
  const Eigen::VectorXd post_mean = prec.ldlt().solve(rhs);
  const Eigen::VectorXd beta_mean = s.beta_draws.colwise().mean();
  CHECK(std::abs(beta_mean(0) - post_mean(0)) < 0.1);
  CHECK(std::abs(beta_mean(1) - post_mean(1)) < 0.25);
}

TEST_CASE("save_samples writes the expected files") {
  const ArealGraph g = build_lattice(3, 3);
  Eigen::MatrixXd X(g.n, 1);
  X.setOnes();
  Rng rng(2);
  Eigen::VectorXd z(g.n);
  for (int i = 0; i < g.n; ++i) z(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  MixedModelSpec spec;
  spec.kind = MixedKind::bsf;
  spec.q = 3;
  const PosteriorSamples s = fit_basis_mcmc(z, g, X, spec, 600, 200, 3);
  const std::string dir = "samples_test_dir";
  save_samples(s, dir);
  CHECK(std::filesystem::exists(dir + "/beta.csv"));
  CHECK(std::filesystem::exists(dir + "/eta.csv"));
  CHECK(std::filesystem::exists(dir + "/tau.csv"));
  CHECK(std::filesystem::exists(dir + "/meta.json"));
  std::filesystem::remove_all(dir);
}
