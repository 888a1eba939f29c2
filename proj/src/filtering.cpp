#include "spreg/filtering.hpp"

#include "spreg/glm.hpp"
#include "spreg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace spreg {

MoranZ moran_z(const ArealGraph& graph, const Eigen::VectorXd& z) {
  const double m = z.mean();
  if ((z.array() - m).abs().maxCoeff() < 1e-12)
    throw std::invalid_argument("moran_z: response is constant");
  const double I = moran_I(graph, Eigen::MatrixXd::Ones(graph.n, 1), z);
  const double n = graph.n;
  // Normality-assumption moments with binary symmetric weights:
  // S0 = 1'A1, S1 = 2 S0, S2 = sum (2 deg_i)^2.
  const double s0 = graph.degrees.sum();
  const double s1 = 2.0 * s0;
  const double s2 = (2.0 * graph.degrees.array()).square().sum();
  const double e_i = -1.0 / (n - 1.0);
  const double var_i =
      (n * n * s1 - n * s2 + 3.0 * s0 * s0) / (s0 * s0 * (n * n - 1.0)) - e_i * e_i;
  return {I, (I - e_i) / std::sqrt(var_i)};
}

int candidate_count(int n_plus, double z_mi) {
  if (n_plus < 1) throw std::invalid_argument("candidate_count: n_plus must be >= 1");
  if (z_mi <= -0.6)
    throw std::invalid_argument("candidate_count: z_mi must exceed -0.6");
  const double np = n_plus;
  const double zpow = std::pow(z_mi + 0.6, 0.1742);
  const double expo = 2.148 - 6.1808 * zpow / std::pow(np, 0.1298) + 3.3534 / zpow;
  const double q0 = np / (1.0 + std::exp(expo));
  return std::clamp(static_cast<int>(std::lround(q0)), 0, n_plus);
}

SelectionResult ttest_select(const MoranBasis& basis, const Eigen::VectorXd& z, double alpha) {
  SelectionResult sel;
  sel.rule = "ttest";
  sel.candidate_count = basis.q;
  for (int j = 0; j < basis.q; ++j) {
    std::vector<double> g0, g1;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      (z(i) > 0.5 ? g1 : g0).push_back(basis.vectors(i, j));
    if (g0.size() < 2 || g1.size() < 2) {
      sel.skipped.push_back(j);
      sel.p_values.push_back(1.0);
      continue;
    }
    const WelchResult w = welch_t_test(g0, g1);
    sel.p_values.push_back(w.p);
    if (w.p < alpha) sel.selected_indices.push_back(j);
  }
  return sel;
}

SelectionResult stepwise_glm(const Eigen::VectorXd& z, const Eigen::MatrixXd& X,
                             const MoranBasis& basis, const std::vector<int>& candidates,
                             double enter_p) {
  if (candidates.empty())
    throw std::invalid_argument("stepwise_glm: candidate list is empty");
  SelectionResult sel;
  sel.rule = "stepwise";
  sel.candidate_count = static_cast<int>(candidates.size());
  sel.p_values.assign(candidates.size(), 1.0);
  std::vector<int> remaining(candidates.begin(), candidates.end());
  std::sort(remaining.begin(), remaining.end());
  Eigen::MatrixXd design = X;
  while (!remaining.empty()) {
    double best_p = 2.0;
    int best_pos = -1;
    for (std::size_t c = 0; c < remaining.size(); ++c) {
      const int col = remaining[c];
      Eigen::MatrixXd trial(design.rows(), design.cols() + 1);
      trial << design, basis.vectors.col(col);
      double pval;
      try {
        const LogisticFit fit = fit_logistic(z, trial);
        if (fit.separation) {
          sel.skipped.push_back(col);
          continue;
        }
        const Eigen::Index last = trial.cols() - 1;
        const double wald = fit.beta(last) / std::sqrt(fit.cov(last, last));
        pval = z_pvalue_two_sided(wald);
      } catch (const std::exception&) {
        sel.skipped.push_back(col);
        continue;
      }
      // deterministic tie-break by index (remaining is sorted; strict <)
      if (pval < best_p) {
        best_p = pval;
        best_pos = static_cast<int>(c);
      }
    }
    if (best_pos < 0 || best_p >= enter_p) break;
    const int col = remaining[static_cast<std::size_t>(best_pos)];
    sel.selected_indices.push_back(col);
    // diagnostics: entry p-value at the step the candidate entered
    for (std::size_t c = 0; c < candidates.size(); ++c)
      if (candidates[c] == col) sel.p_values[c] = best_p;
    Eigen::MatrixXd next(design.rows(), design.cols() + 1);
    next << design, basis.vectors.col(col);
    design = next;
    remaining.erase(remaining.begin() + best_pos);
  }
  return sel;
}

void write_selection_json(const SelectionResult& sel, const std::string& path) {
  nlohmann::json j;
  j["rule"] = sel.rule;
  j["candidate_count"] = sel.candidate_count;
  j["selected_indices"] = sel.selected_indices;
  j["p_values"] = sel.p_values;
  j["skipped"] = sel.skipped;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_selection_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace spreg
