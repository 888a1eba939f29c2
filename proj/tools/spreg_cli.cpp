#include <CLI11.hpp>

#include <Eigen/Dense>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spreg/areal_graph.hpp"
#include "spreg/autologistic.hpp"
#include "spreg/filtering.hpp"
#include "spreg/fit_result.hpp"
#include "spreg/mixed.hpp"
#include "spreg/moran.hpp"
#include "spreg/study.hpp"

namespace {

// Exit codes: 0 success, 2 validation error, 3 fit failure.
constexpr int kValidationError = 2;
constexpr int kFitFailure = 3;

struct FitFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("ragged CSV in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty CSV " + path);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

int run_simulate(int rows, int cols, std::uint64_t seed, const std::string& out,
                 const std::string& graph_out) {
  const spreg::ArealGraph graph = spreg::build_lattice(rows, cols);
  const spreg::Covariates cov = spreg::generate_covariates(graph);
  const spreg::Dataset data = spreg::simulate_replicate(cov, seed);
  spreg::write_dataset_csv(graph, cov, data, out);
  if (!graph_out.empty()) spreg::write_edge_list(graph, graph_out);
  return 0;
}

int run_fit(const std::string& model, const std::string& data_path, const std::string& graph_path,
            int q, bool adjust, std::uint64_t seed, const std::string& preset,
            const std::string& out) {
  const spreg::ArealGraph graph = spreg::read_edge_list(graph_path);
  const spreg::Dataset data = spreg::read_dataset_csv(data_path);
  if (data.z.size() != graph.n)
    throw std::invalid_argument("data has " + std::to_string(data.z.size()) +
                                " sites but graph has " + std::to_string(graph.n));
  spreg::StudyConfig config =
      preset == "full" ? spreg::StudyConfig::full_scale() : spreg::StudyConfig::desk_scale();
  spreg::ModelEntry entry{model, q, adjust};
  if (adjust && model != "rsr" && model != "bsf")
    throw std::invalid_argument("--adjust applies only to rsr/bsf");
  spreg::FitResult fit;
  try {
    fit = spreg::fit_model(entry, data, graph, config, seed);
  } catch (const std::invalid_argument&) {
    throw;  // bad request, not a numerical failure
  } catch (const std::exception& ex) {
    throw FitFailure(ex.what());
  }
  spreg::write_fit_json(fit, out);
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int run_eigs(const std::string& graph_path, const std::string& design_path, int q,
             const std::string& out) {
  const spreg::ArealGraph graph = spreg::read_edge_list(graph_path);
  Eigen::MatrixXd X;
  if (design_path.empty())
    X = Eigen::MatrixXd::Ones(graph.n, 1);
  else {
    X = read_matrix_csv(design_path);
    if (X.rows() != graph.n)
      throw std::invalid_argument("design has " + std::to_string(X.rows()) +
                                  " rows but graph has " + std::to_string(graph.n));
  }
  const Eigen::MatrixXd M = spreg::moran_operator(graph, X);
  const spreg::MoranBasis basis = spreg::principal_eigs(M, q, X);
  spreg::write_basis_csv(basis, out);
  return 0;
}

int run_select(const std::string& rule, const std::string& graph_path,
               const std::string& data_path, const std::string& basis_path, double alpha,
               double enter_p, const std::string& out) {
  const spreg::ArealGraph graph = spreg::read_edge_list(graph_path);
  const spreg::Dataset data = spreg::read_dataset_csv(data_path);
  if (data.z.size() != graph.n)
    throw std::invalid_argument("data/graph size mismatch");
  spreg::SelectionResult sel;
  if (rule == "q0") {
    const Eigen::MatrixXd M1 = spreg::moran_operator(graph, Eigen::MatrixXd::Ones(graph.n, 1));
    const Eigen::VectorXd evals =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M1, Eigen::EigenvaluesOnly).eigenvalues();
    const int n_plus = static_cast<int>((evals.array() > 1e-8).count());
    const spreg::MoranZ mz = spreg::moran_z(graph, data.z);
    sel.rule = "q0";
    sel.candidate_count = spreg::candidate_count(n_plus, mz.z);
  } else if (rule == "ttest" || rule == "stepwise") {
    if (basis_path.empty()) throw std::invalid_argument("--basis is required for rule " + rule);
    const spreg::MoranBasis basis = spreg::read_basis_csv(basis_path);
    if (basis.vectors.rows() != graph.n)
      throw std::invalid_argument("basis/graph size mismatch");
    if (rule == "ttest")
      sel = spreg::ttest_select(basis, data.z, alpha);
    else {
      std::vector<int> candidates(static_cast<std::size_t>(basis.q));
      for (int j = 0; j < basis.q; ++j) candidates[static_cast<std::size_t>(j)] = j;
      sel = spreg::stepwise_glm(data.z, data.X, basis, candidates, enter_p);
    }
  } else {
    throw std::invalid_argument("unknown rule " + rule);
  }
  spreg::write_selection_json(sel, out);
  return 0;
}

int run_study(const std::string& config_path, const std::string& out,
              const std::string& surfaces_dir) {
  const spreg::StudyConfig config = spreg::read_study_config(config_path);
  spreg::StudyReport report;
  try {
    report = spreg::run_study(config);
  } catch (const std::exception& ex) {
    throw FitFailure(ex.what());
  }
  spreg::write_report_csv(report, out);
  if (!surfaces_dir.empty()) {
    const spreg::ArealGraph graph = spreg::build_lattice(config.rows, config.cols);
    const spreg::Covariates cov = spreg::generate_covariates(graph, config.beta_true);
    const spreg::Dataset data = spreg::simulate_replicate(cov, config.seed);
    std::vector<spreg::FitResult> fits;
    for (const auto& entry : config.models) {
      try {
        fits.push_back(spreg::fit_model(entry, data, graph, config, config.seed + 17));
      } catch (const std::exception& ex) {
        std::cerr << "warning: surface fit " << entry.label() << " failed: " << ex.what() << "\n";
      }
    }
    spreg::emit_surfaces(data, fits, config.rows, config.cols, surfaces_dir);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial regression models for binary areal data"};
  app.require_subcommand(1);

  int rows = 30, cols = 30, q = 100;
  std::uint64_t seed = 1;
  std::string out, graph_out, model, data_path, graph_path, design_path, basis_path, rule;
  std::string config_path, surfaces_dir, preset = "desk";
  bool adjust = false;
  double alpha = 0.1, enter_p = 0.2;

  auto* sim = app.add_subcommand("simulate", "Simulate one dataset from the study design");
  sim->add_option("--rows", rows)->check(CLI::PositiveNumber);
  sim->add_option("--cols", cols)->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed);
  sim->add_option("--out", out)->required();
  sim->add_option("--graph-out", graph_out, "Also write the lattice edge list");

  auto* fit = app.add_subcommand("fit", "Fit one model to a dataset");
  fit->add_option("--model", model)->required()->check(
      CLI::IsMember({"logistic", "autologistic", "copcar", "car", "rsr", "bsf"}));
  fit->add_option("--data", data_path)->required();
  fit->add_option("--graph", graph_path)->required();
  fit->add_option("--q", q)->check(CLI::PositiveNumber);
  fit->add_flag("--adjust", adjust, "Report regression-adjusted coefficients (rsr/bsf)");
  fit->add_option("--seed", seed);
  fit->add_option("--preset", preset)->check(CLI::IsMember({"desk", "full"}));
  fit->add_option("--out", out)->required();

  auto* eigs = app.add_subcommand("eigs", "Principal Moran eigenvectors of a graph");
  eigs->add_option("--graph", graph_path)->required();
  eigs->add_option("--design", design_path, "Design matrix CSV (default: intercept only)");
  eigs->add_option("--q", q)->required()->check(CLI::PositiveNumber);
  eigs->add_option("--out", out)->required();

  auto* select = app.add_subcommand("select", "Classical eigenvector selection rules");
  select->add_option("--rule", rule)->required()->check(CLI::IsMember({"q0", "ttest", "stepwise"}));
  select->add_option("--graph", graph_path)->required();
  select->add_option("--data", data_path)->required();
  select->add_option("--basis", basis_path, "Basis CSV (ttest/stepwise)");
  select->add_option("--alpha", alpha);
  select->add_option("--enter-p", enter_p);
  select->add_option("--out", out)->required();

  auto* study = app.add_subcommand("study", "Run the replication study");
  study->add_option("--config", config_path)->required();
  study->add_option("--out", out)->required();
  study->add_option("--surfaces-dir", surfaces_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationError;
  }

  try {
    if (sim->parsed()) return run_simulate(rows, cols, seed, out, graph_out);
    if (fit->parsed()) return run_fit(model, data_path, graph_path, q, adjust, seed, preset, out);
    if (eigs->parsed()) return run_eigs(graph_path, design_path, q, out);
    if (select->parsed()) return run_select(rule, graph_path, data_path, basis_path, alpha, enter_p, out);
    if (study->parsed()) return run_study(config_path, out, surfaces_dir);
  } catch (const FitFailure& ex) {
    std::cerr << "fit failure: " << ex.what() << "\n";
    return kFitFailure;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kValidationError;
  }
  return kValidationError;
}
