#pragma once

#include <Eigen/Dense>

namespace spreg {

struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;      // inverse Fisher information at the MLE
  double log_lik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;  // detected quasi-separation; fit is ridge-stabilized
};

/// Ordinary logistic regression by iteratively reweighted least squares.
/// On (quasi-)separation the fit falls back to a small ridge penalty and
/// flags it rather than failing.
LogisticFit fit_logistic(const Eigen::VectorXd& z, const Eigen::MatrixXd& X,
                         double ridge = 0.0, int max_iter = 100, double tol = 1e-10);

/// Bernoulli log-likelihood at linear predictor eta = X beta.
double logistic_log_lik(const Eigen::VectorXd& z, const Eigen::VectorXd& eta);

}  // namespace spreg
