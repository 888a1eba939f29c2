#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "spreg/stats.hpp"
#include "spreg/study.hpp"

using namespace spreg;

TEST_CASE("generate_covariates calibrates the confounded design") {
  const ArealGraph g = build_lattice(30, 30);
  const Covariates cov = generate_covariates(g);
  REQUIRE(cov.x1.size() == g.n);
  // Coordinates span the origin-centered unit square.
  CHECK(cov.x.minCoeff() == doctest::Approx(-0.5));
  CHECK(cov.x.maxCoeff() == doctest::Approx(0.5));
  CHECK(std::abs(cov.x1.mean()) < 1e-10);
  // x2 = x + y + 3 s by construction.
  CHECK((cov.x2 - cov.x - cov.y - 3.0 * cov.s).lpNorm<Eigen::Infinity>() < 1e-12);
  // Calibration target.
  CHECK(std::abs(correlation(cov.x1, cov.x2) - 0.45) <= 0.005);
  CHECK(cov.amplitude > 0.0);
  CHECK(cov.amplitude < 1.0);
  // True surface is the logistic of 0.2 + x1 + x2.
  for (int i : {0, 17, 450, 899}) {
    const double lin = 0.2 + cov.x1(i) + cov.x2(i);
    CHECK(cov.p(i) == doctest::Approx(1.0 / (1.0 + std::exp(-lin))).epsilon(1e-12));
  }
}

TEST_CASE("simulate_replicate is deterministic and withholds x2") {
  const ArealGraph g = build_lattice(10, 10);
  const Covariates cov = generate_covariates(g);
  const Dataset a = simulate_replicate(cov, 42);
  const Dataset b = simulate_replicate(cov, 42);
  const Dataset c = simulate_replicate(cov, 43);
  CHECK(a.z == b.z);
  CHECK(a.z != c.z);
  REQUIRE(a.X.cols() == 2);
  CHECK(a.X.col(0) == Eigen::VectorXd::Ones(g.n));
  CHECK(a.X.col(1) == cov.x1);
  CHECK(a.p_true == cov.p);
  for (int i = 0; i < g.n; ++i) CHECK((a.z(i) == 0.0 || a.z(i) == 1.0));
}

TEST_CASE("dataset CSV roundtrip") {
  const ArealGraph g = build_lattice(6, 7);
  const Covariates cov = generate_covariates(g);
  const Dataset data = simulate_replicate(cov, 5);
  const std::string path = "study_roundtrip.csv";
  write_dataset_csv(g, cov, data, path);
  const Dataset back = read_dataset_csv(path);
  CHECK(back.z == data.z);
  CHECK((back.X - data.X).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK((back.p_true - data.p_true).lpNorm<Eigen::Infinity>() < 1e-9);
  std::filesystem::remove(path);
}

TEST_CASE("study config JSON roundtrip and presets") {
  StudyConfig cfg = StudyConfig::desk_scale();
  CHECK(cfg.replicates == 30);
  CHECK(StudyConfig::full_scale().replicates == 100);
  cfg.rows = 12;
  cfg.cols = 13;
  cfg.seed = 77;
  cfg.models = {{"logistic"}, {"rsr", 50, true}, {"bsf", 200, false}};
  const std::string path = "study_config_roundtrip.json";
  write_study_config(cfg, path);
  const StudyConfig back = read_study_config(path);
  CHECK(back.rows == 12);
  CHECK(back.cols == 13);
  CHECK(back.seed == 77);
  REQUIRE(back.models.size() == 3);
  CHECK(back.models[1].model == "rsr");
  CHECK(back.models[1].q == 50);
  CHECK(back.models[1].adjust);
  CHECK(back.models[2].label() == "bsf_q200");
  CHECK(back.basis_iterations == cfg.basis_iterations);
  std::filesystem::remove(path);
}

TEST_CASE("model labels") {
  CHECK(ModelEntry{"logistic"}.label() == "logistic");
  CHECK(ModelEntry{"car"}.label() == "car");
  CHECK(ModelEntry{"rsr", 100}.label() == "rsr_q100");
  CHECK(ModelEntry{"bsf", 50}.label() == "bsf_q50");
}

TEST_CASE("run_study aggregates a tiny logistic-only design") {
  StudyConfig cfg;
  cfg.rows = 8;
  cfg.cols = 8;
  cfg.replicates = 1;
  cfg.models = {{"logistic"}};
  cfg.parallelism = 1;
  cfg.seed = 3;
  const StudyReport report = run_study(cfg);
  REQUIRE(report.rows.size() == 1);
  const ModelRow& row = report.rows[0];
  CHECK(row.model == "logistic");
  CHECK(row.failures == 0);
  REQUIRE(report.records.size() == 1);
  const ReplicateRecord& rec = report.records[0];
  CHECK(rec.ok);
  // With a single replicate every aggregate collapses onto that replicate.
  CHECK(row.median_estimate == doctest::Approx(rec.estimate));
  CHECK(row.median_ci_width == doctest::Approx(rec.interval.width()));
  CHECK(row.mse == doctest::Approx((rec.estimate - 1.0) * (rec.estimate - 1.0)));
  CHECK(row.median_pred_error == doctest::Approx(rec.pred_error));
  CHECK(row.coverage_rate == (rec.interval.contains(1.0) ? 1.0 : 0.0));
  CHECK(row.type2_rate == (rec.interval.contains(0.0) ? 1.0 : 0.0));

  const std::string path = "study_report.csv";
  write_report_csv(report, path);
  CHECK(std::filesystem::exists(path));
  std::filesystem::remove(path);
}

TEST_CASE("emit_surfaces writes row-major grids of the right shape") {
  const ArealGraph g = build_lattice(5, 4);
  const Covariates cov = generate_covariates(g);
  const Dataset data = simulate_replicate(cov, 9);
  FitResult fit;
  fit.method = "logistic";
  fit.p_hat = Eigen::VectorXd::LinSpaced(g.n, 0.1, 0.9);
  const std::string dir = "surfaces_test_dir";
  emit_surfaces(data, {fit}, 5, 4, dir);
  CHECK(std::filesystem::exists(dir + "/p_true.csv"));
  CHECK(std::filesystem::exists(dir + "/p_hat_logistic.csv"));
  // Shape check: 5 lines of 4 comma-separated values.
  std::ifstream in(dir + "/p_hat_logistic.csv");
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
  }
  CHECK(lines == 5);
  std::filesystem::remove_all(dir);
}
