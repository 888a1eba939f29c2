#pragma once

#include <Eigen/Dense>
#include <vector>

namespace spreg {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Standard normal cdf.
double norm_cdf(double x);

/// Standard normal quantile (Wichura's AS 241, double precision).
double norm_quantile(double p);

/// P(X <= h, Y <= k) for standard bivariate normal with correlation r.
/// Absolute error below 1e-14 (Genz's adaptation of Drezner--Wesolowsky).
double bvn_cdf(double h, double k, double r);

/// Gamma quantile, shape/rate parameterization.
double gamma_quantile(double p, double shape, double rate);

/// Two-sided p-value for a Student-t statistic with df degrees of freedom.
double t_pvalue_two_sided(double t, double df);

/// Two-sided p-value for a standard normal statistic.
double z_pvalue_two_sided(double z);

/// Empirical quantile (linear interpolation between order statistics).
double quantile(std::vector<double> v, double p);

double median(std::vector<double> v);

/// Sample Pearson correlation.
double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Welch two-sample t test. Returns {t, df, p}. Requires both groups of size >= 2.
struct WelchResult {
  double t;
  double df;
  double p;
};
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace spreg
