#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace spreg {

/// Undirected areal graph: adjacency kept both dense (linear algebra) and as
/// an edge list (Gibbs sweeps, pairwise-likelihood enumeration).
struct ArealGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, 0-based
  Eigen::MatrixXd adjacency;               // symmetric binary, zero diagonal
  Eigen::VectorXd degrees;                 // row sums of adjacency
  std::vector<std::vector<int>> neighbors;
  // Vertex coordinates when the graph came from a lattice (empty otherwise).
  Eigen::VectorXd coord_x;
  Eigen::VectorXd coord_y;

  int edge_count() const { return static_cast<int>(edges.size()); }
};

/// Rook-adjacency rows x cols lattice, vertices row-major, coordinates on the
/// unit square centered at the origin.
ArealGraph build_lattice(int rows, int cols);

/// Q = diag(A1) - rho * A. rho in [0,1); rho = 1 (the Laplacian) only when
/// allow_laplacian is set.
Eigen::MatrixXd car_precision(const ArealGraph& graph, double rho, bool allow_laplacian = false);

/// Graph Laplacian diag(A1) - A.
Eigen::MatrixXd laplacian(const ArealGraph& graph);

/// Edge-list exchange format: header line "n=<count>", then one "i j" pair per
/// line, 0-based.
void write_edge_list(const ArealGraph& graph, const std::string& path);
ArealGraph read_edge_list(const std::string& path);

}  // namespace spreg
