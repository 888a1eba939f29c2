#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace spreg {

/// Per-parameter interval.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  bool contains(double v) const { return lower <= v && v <= upper; }
};

/// Point estimates, 95% intervals, fitted probability surface, method tag.
/// Shared across all six fitters so the study harness can treat them
/// uniformly.
struct FitResult {
  std::string method;
  std::vector<std::string> names;     // parameter names, e.g. beta0, beta1, kappa
  Eigen::VectorXd estimates;
  std::vector<Interval> intervals;
  Eigen::VectorXd p_hat;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
  std::map<std::string, double> extras;  // e.g. rho, phi_inv_rho

  int index_of(const std::string& name) const;
  double estimate(const std::string& name) const;
  const Interval& interval(const std::string& name) const;
};

void write_fit_json(const FitResult& fit, const std::string& path);
FitResult read_fit_json(const std::string& path);

}  // namespace spreg
