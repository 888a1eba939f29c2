#include "spreg/glm.hpp"

#include "spreg/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace spreg {

double logistic_log_lik(const Eigen::VectorXd& z, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // log(1+e^eta) computed stably
    const double lse = eta(i) > 0 ? eta(i) + std::log1p(std::exp(-eta(i)))
                                  : std::log1p(std::exp(eta(i)));
    ll += z(i) * eta(i) - lse;
  }
  return ll;
}

LogisticFit fit_logistic(const Eigen::VectorXd& z, const Eigen::MatrixXd& X, double ridge,
                         int max_iter, double tol) {
  const Eigen::Index p = X.cols();
  LogisticFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < max_iter; ++it) {
    fit.iterations = it + 1;
    const Eigen::VectorXd eta = X * fit.beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = logistic(eta(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    info.diagonal().array() += ridge;
    Eigen::VectorXd score = X.transpose() * (z - mu) - ridge * fit.beta;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("fit_logistic: singular information matrix");
    const Eigen::VectorXd step = ldlt.solve(score);
    fit.beta += step;
    if (step.lpNorm<Eigen::Infinity>() < tol) {
      fit.converged = true;
      break;
    }
    // Diverging coefficients signal separation; restart with a ridge.
    if (fit.beta.lpNorm<Eigen::Infinity>() > 30.0 && ridge == 0.0) {
      LogisticFit ridged = fit_logistic(z, X, 1e-4, max_iter, tol);
      ridged.separation = true;
      return ridged;
    }
  }
  const Eigen::VectorXd eta = X * fit.beta;
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double mu = logistic(eta(i));
    w(i) = mu * (1.0 - mu);
  }
  Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
  info.diagonal().array() += ridge;
  fit.cov = info.inverse();
  fit.log_lik = logistic_log_lik(z, eta);
  return fit;
}

}  // namespace spreg
