#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spreg/areal_graph.hpp"
#include "spreg/fit_result.hpp"

namespace spreg {

/// Deterministic covariate surfaces for the simulation design: x1 = x and
/// x2 = x + y + 3s with s a small-scale sinusoid calibrated so that
/// cor(x1, x2) = 0.45.
struct Covariates {
  Eigen::VectorXd x, y;   // lattice coordinates, origin-centered unit square
  Eigen::VectorXd x1, x2, s;
  Eigen::VectorXd p;      // true mean surface under beta_true
  double amplitude = 0.0; // calibrated sinusoid amplitude c
};

Covariates generate_covariates(const ArealGraph& lattice,
                               const Eigen::Vector3d& beta_true = {0.2, 1.0, 1.0});

/// One simulated dataset. The analysis design matrix X = (1, x1); x2 is the
/// withheld confounder and is deliberately not part of X.
struct Dataset {
  Eigen::VectorXd z;
  Eigen::MatrixXd X;
  Eigen::VectorXd p_true;
};

Dataset simulate_replicate(const Covariates& cov, std::uint64_t seed);

struct ModelEntry {
  std::string model;  // logistic | autologistic | copcar | car | rsr | bsf
  int q = 100;        // rsr/bsf only
  bool adjust = false;  // rsr/bsf: add the posterior-predictive adjusted row

  std::string label() const;
};

struct StudyConfig {
  int rows = 30, cols = 30;
  int replicates = 100;
  Eigen::Vector3d beta_true{0.2, 1.0, 1.0};
  std::vector<ModelEntry> models;
  std::uint64_t seed = 1;
  int basis_iterations = 25000, basis_burn_in = 5000;
  int car_iterations = 60000, car_burn_in = 10000;
  int bootstrap_b = 500;  // sandwich/Godambe bootstrap size
  int parallelism = 8;

  /// CI preset: 30 replicates, shorter chains.
  static StudyConfig desk_scale();
  /// The published design: 100 replicates, full chain lengths.
  static StudyConfig full_scale();
};

StudyConfig read_study_config(const std::string& path);
void write_study_config(const StudyConfig& config, const std::string& path);

struct ReplicateRecord {
  int replicate = 0;
  std::string model;
  bool ok = false;
  double estimate = 0.0;
  Interval interval;
  double pred_error = 0.0;  // ||p_hat - p||
};

struct ModelRow {
  std::string model;
  double median_estimate = 0.0;
  double median_ci_width = 0.0;
  double mse = 0.0;
  double coverage_rate = 0.0;
  double type2_rate = 0.0;
  double median_pred_error = 0.0;
  int failures = 0;
};

struct StudyReport {
  std::vector<ModelRow> rows;
  std::vector<ReplicateRecord> records;
};

/// Fit one model to one dataset (the study's dispatch, also behind the CLI
/// `fit` subcommand).
FitResult fit_model(const ModelEntry& entry, const Dataset& data, const ArealGraph& graph,
                    const StudyConfig& config, std::uint64_t seed);

StudyReport run_study(const StudyConfig& config);

void write_report_csv(const StudyReport& report, const std::string& path);

/// Figure-style grids: true p and each fit's p_hat as rows x cols CSVs
/// (row-major), one file per surface.
void emit_surfaces(const Dataset& data, const std::vector<FitResult>& fits, int rows, int cols,
                   const std::string& dir);

void write_dataset_csv(const ArealGraph& lattice, const Covariates& cov, const Dataset& data,
                       const std::string& path);
Dataset read_dataset_csv(const std::string& path);

}  // namespace spreg
