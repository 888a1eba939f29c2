#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "spreg/areal_graph.hpp"
#include "spreg/fit_result.hpp"

namespace spreg {

/// copCAR parameters; the fit itself works on (beta', Phi^{-1}(rho))'.
struct CopParams {
  Eigen::VectorXd beta;
  double rho = 0.0;  // in [0,1)
};

/// CAR marginal variances sigma^2 = vecdiag(Q^{-1}).
struct CarMarginals {
  Eigen::VectorXd sigma2;
};

CarMarginals car_marginals(const ArealGraph& graph, double rho);

/// One draw from the copCAR model with Bernoulli marginals
/// {1+exp(-x_i'beta)}^{-1}.
Eigen::VectorXd simulate_copcar(const CopParams& params, const ArealGraph& graph,
                                const Eigen::MatrixXd& X, std::uint64_t seed);

/// Hierarchical gamma--Poisson copula simulator (log link). Counts only; no
/// fitting for this model.
Eigen::VectorXd simulate_gamma_poisson(const Eigen::VectorXd& beta, double nu,
                                       const ArealGraph& graph, const Eigen::MatrixXd& X,
                                       double rho, std::uint64_t seed);

enum class CmlPairs { adjacent, all };

/// Log composite marginal likelihood built from pairwise rectangle
/// probabilities of the CAR copula. `floor_hits`, when given, counts pair
/// probabilities that had to be floored at 1e-300 due to roundoff.
double cml(const CopParams& params, const Eigen::VectorXd& z, const ArealGraph& graph,
           const Eigen::MatrixXd& X, CmlPairs pairs, int* floor_hits = nullptr);

/// CML fit with Godambe sandwich inference on (beta', Phi^{-1}(rho))'.
FitResult fit_cml(const Eigen::VectorXd& z, const ArealGraph& graph, const Eigen::MatrixXd& X,
                  int b = 500, std::uint64_t seed = 1);

}  // namespace spreg
