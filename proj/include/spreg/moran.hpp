#pragma once

#include <Eigen/Dense>
#include <string>

#include "spreg/areal_graph.hpp"

namespace spreg {

/// Truncated eigendecomposition of a Moran operator. Columns of `vectors` are
/// orthonormal and live in the orthogonal complement of C(residual_to).
struct MoranBasis {
  int q = 0;
  Eigen::VectorXd values;    // descending
  Eigen::MatrixXd vectors;   // n x q, orthonormal columns
  Eigen::MatrixXd residual_to;  // the design matrix defining P_x
};

/// Orthogonal projection X(X'X)^{-1}X'. Throws on rank deficiency, naming the
/// offending column.
Eigen::MatrixXd projection(const Eigen::MatrixXd& X);

/// Moran operator (I - P_x) A (I - P_x).
Eigen::MatrixXd moran_operator(const ArealGraph& graph, const Eigen::MatrixXd& X);

/// q largest eigenpairs of a symmetric matrix, eigenvalues descending.
/// Dense solver for n <= dense_cutoff, Lanczos with full reorthogonalization
/// above that (or when force_iterative is set).
MoranBasis principal_eigs(const Eigen::MatrixXd& S, int q,
                          const Eigen::MatrixXd& residual_to = Eigen::MatrixXd(),
                          int dense_cutoff = 2000, bool force_iterative = false);

/// Generalized Moran's I: (n / 1'A1) * v'M_x v / v'(I-P_x)(I-P_x)v.
/// Classical Moran's I when X is the all-ones column.
double moran_I(const ArealGraph& graph, const Eigen::MatrixXd& X, const Eigen::VectorXd& v);

/// Basis export: CSV, one eigenvector per column, header row of eigenvalues.
void write_basis_csv(const MoranBasis& basis, const std::string& path);
MoranBasis read_basis_csv(const std::string& path);

}  // namespace spreg
