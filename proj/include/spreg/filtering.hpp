#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spreg/areal_graph.hpp"
#include "spreg/moran.hpp"

namespace spreg {

struct SelectionResult {
  int candidate_count = 0;           // q0 when the q0 rule was involved
  std::vector<int> selected_indices; // basis-column indices, in selection order
  std::string rule;
  std::vector<double> p_values;      // per-candidate diagnostics
  std::vector<int> skipped;          // candidates dropped (degenerate group / separation)
};

void write_selection_json(const SelectionResult& sel, const std::string& path);

/// Classical Moran's I for a response vector, with the z score under the
/// normality assumption. Errors on a constant input.
struct MoranZ {
  double I;
  double z;
};
MoranZ moran_z(const ArealGraph& graph, const Eigen::VectorXd& z);

/// Closed-form candidate count q0, rounded to nearest and clamped to
/// [0, n_plus]. Requires z_mi > -0.6.
int candidate_count(int n_plus, double z_mi);

/// Welch two-sample t test per basis column, grouped by the binary response;
/// retain columns with p < alpha.
SelectionResult ttest_select(const MoranBasis& basis, const Eigen::VectorXd& z, double alpha = 0.1);

/// Forward stepwise ordinary logistic selection over the candidate columns,
/// entering the smallest Wald p-value while it is below enter_p.
SelectionResult stepwise_glm(const Eigen::VectorXd& z, const Eigen::MatrixXd& X,
                             const MoranBasis& basis, const std::vector<int>& candidates,
                             double enter_p = 0.2);

}  // namespace spreg
