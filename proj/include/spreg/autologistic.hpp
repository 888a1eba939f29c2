#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "spreg/areal_graph.hpp"
#include "spreg/fit_result.hpp"

namespace spreg {

/// Centered autologistic parameters theta = (beta', kappa)'.
struct AutoParams {
  Eigen::VectorXd beta;
  double kappa = 0.0;

  Eigen::VectorXd packed() const {
    Eigen::VectorXd t(beta.size() + 1);
    t.head(beta.size()) = beta;
    t(beta.size()) = kappa;
    return t;
  }
  static AutoParams unpack(const Eigen::VectorXd& t) {
    return {t.head(t.size() - 1), t(t.size() - 1)};
  }
};

/// zeta = {1 + exp(-X beta)}^{-1}, the independence expectations.
Eigen::VectorXd independence_expectation(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta);

/// Exact joint log pmf via brute-force normalization over {0,1}^n. n <= 20.
double exact_log_pmf(const Eigen::VectorXd& z, const AutoParams& params, const ArealGraph& graph,
                     const Eigen::MatrixXd& X);

/// Systematic-sweep single-site Gibbs sampler for the centered autologistic.
std::vector<Eigen::VectorXd> gibbs_simulate(const AutoParams& params, const ArealGraph& graph,
                                            const Eigen::MatrixXd& X, int n_samples,
                                            int sweeps_per_sample, int burn_in,
                                            std::uint64_t seed);

/// Log pseudolikelihood and its analytic score.
double log_pl(const AutoParams& params, const Eigen::VectorXd& z, const ArealGraph& graph,
              const Eigen::MatrixXd& X);
Eigen::VectorXd score_pl(const AutoParams& params, const Eigen::VectorXd& z,
                         const ArealGraph& graph, const Eigen::MatrixXd& X);

/// Maximum pseudolikelihood fit: quasi-Newton with the analytic score,
/// intervals left empty (use sandwich_ci / bootstrap_ci). Carries the observed
/// information for sandwich use.
struct MpleFit {
  AutoParams params;
  Eigen::MatrixXd observed_information;  // -Hessian of log PL at the optimum
  FitResult result;                      // intervals filled in by an interval routine
};
MpleFit fit_mple(const Eigen::VectorXd& z, const ArealGraph& graph, const Eigen::MatrixXd& X);

/// Parametric bootstrap percentile intervals: b refits on Gibbs replicates
/// drawn at the MPLE.
std::vector<Interval> bootstrap_ci(const MpleFit& fit, const Eigen::VectorXd& z,
                                   const ArealGraph& graph, const Eigen::MatrixXd& X, int b,
                                   double level, std::uint64_t seed);

/// Godambe sandwich normal-theory intervals; J estimated by a parametric
/// bootstrap of scores at the MPLE.
std::vector<Interval> sandwich_ci(const MpleFit& fit, const ArealGraph& graph,
                                  const Eigen::MatrixXd& X, int b, double level,
                                  std::uint64_t seed);

/// Conditional probability of Z_i = 1 given the observed neighbor values.
Eigen::VectorXd predict(const AutoParams& params, const Eigen::VectorXd& z,
                        const ArealGraph& graph, const Eigen::MatrixXd& X);

/// Full fit with intervals and fitted surface; `interval` is "sandwich" or
/// "bootstrap".
FitResult fit_autologistic(const Eigen::VectorXd& z, const ArealGraph& graph,
                           const Eigen::MatrixXd& X, const std::string& interval = "sandwich",
                           int b = 500, std::uint64_t seed = 1);

}  // namespace spreg
