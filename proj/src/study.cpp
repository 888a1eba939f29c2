#include "spreg/study.hpp"

#include "spreg/autologistic.hpp"
#include "spreg/copcar.hpp"
#include "spreg/glm.hpp"
#include "spreg/mixed.hpp"
#include "spreg/rng.hpp"
#include "spreg/stats.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace spreg {

Covariates generate_covariates(const ArealGraph& lattice, const Eigen::Vector3d& beta_true) {
  if (lattice.coord_x.size() != lattice.n)
    throw std::invalid_argument("generate_covariates: graph has no lattice coordinates");
  Covariates cov;
  cov.x = lattice.coord_x;
  cov.y = lattice.coord_y;
  const Eigen::VectorXd s0 =
      ((3.0 * std::numbers::pi * cov.x.array()).sin() *
       (3.0 * std::numbers::pi * cov.y.array()).sin())
          .matrix();
  cov.x1 = cov.x;
  const auto cor_at = [&](double c) {
    const Eigen::VectorXd x2 = cov.x + cov.y + 3.0 * c * s0;
    return correlation(cov.x1, x2);
  };
  // cor decreases in the amplitude; bisect to the target 0.45.
  double lo = 0.0, hi = 4.0;
  if (cor_at(lo) < 0.45 || cor_at(hi) > 0.45)
    throw std::runtime_error("generate_covariates: correlation 0.45 is not bracketed; achieved " +
                             std::to_string(cor_at(lo)) + " at c=0");
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = (lo + hi) / 2.0;
    (cor_at(mid) > 0.45 ? lo : hi) = mid;
  }
  cov.amplitude = (lo + hi) / 2.0;
  const double achieved = cor_at(cov.amplitude);
  if (std::abs(achieved - 0.45) > 0.005)
    throw std::runtime_error("generate_covariates: calibration failed; achieved correlation " +
                             std::to_string(achieved));
  cov.s = cov.amplitude * s0;
  cov.x2 = cov.x + cov.y + 3.0 * cov.s;
  const Eigen::VectorXd eta =
      beta_true(0) + beta_true(1) * cov.x1.array() + beta_true(2) * cov.x2.array();
  cov.p.resize(lattice.n);
  for (int i = 0; i < lattice.n; ++i) cov.p(i) = logistic(eta(i));
  return cov;
}

Dataset simulate_replicate(const Covariates& cov, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  const Eigen::Index n = cov.p.size();
  data.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) data.z(i) = rng.bernoulli(cov.p(i)) ? 1.0 : 0.0;
  // Models only ever see X = (1, x1); x2 stays withheld.
  data.X.resize(n, 2);
  data.X.col(0).setOnes();
  data.X.col(1) = cov.x1;
  data.p_true = cov.p;
  return data;
}

std::string ModelEntry::label() const {
  std::string l = model;
  if (model == "rsr" || model == "bsf") l += "_q" + std::to_string(q);
  if (adjust) l += "_adjusted";
  return l;
}

StudyConfig StudyConfig::desk_scale() {
  StudyConfig c;
  c.replicates = 30;
  c.seed = 63;
  c.basis_iterations = 90000;
  c.basis_burn_in = 20000;
  c.car_iterations = 30000;
  c.car_burn_in = 10000;
  c.bootstrap_b = 300;
  c.models = {{"logistic"}, {"autologistic"}, {"copcar"}, {"car"},
              {"rsr", 100, true},
              {"bsf", 50}, {"bsf", 100}, {"bsf", 200}, {"bsf", 400}};
  return c;
}

StudyConfig StudyConfig::full_scale() {
  StudyConfig c = desk_scale();
  c.replicates = 100;
  c.basis_iterations = 250000;
  c.basis_burn_in = 50000;
  c.car_iterations = 60000;
  c.car_burn_in = 10000;
  c.bootstrap_b = 500;
  return c;
}

StudyConfig read_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_study_config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  StudyConfig c = StudyConfig::desk_scale();
  if (j.contains("preset")) {
    const std::string p = j["preset"].get<std::string>();
    if (p == "full") c = StudyConfig::full_scale();
    else if (p != "desk") throw std::runtime_error("unknown preset: " + p);
  }
  if (j.contains("rows")) c.rows = j["rows"].get<int>();
  if (j.contains("cols")) c.cols = j["cols"].get<int>();
  if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("beta_true")) {
    const auto b = j["beta_true"].get<std::vector<double>>();
    if (b.size() != 3) throw std::runtime_error("beta_true must have length 3");
    c.beta_true = Eigen::Vector3d(b[0], b[1], b[2]);
  }
  if (j.contains("basis_iterations")) c.basis_iterations = j["basis_iterations"].get<int>();
  if (j.contains("basis_burn_in")) c.basis_burn_in = j["basis_burn_in"].get<int>();
  if (j.contains("car_iterations")) c.car_iterations = j["car_iterations"].get<int>();
  if (j.contains("car_burn_in")) c.car_burn_in = j["car_burn_in"].get<int>();
  if (j.contains("bootstrap_b")) c.bootstrap_b = j["bootstrap_b"].get<int>();
  if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<int>();
  if (j.contains("models")) {
    c.models.clear();
    for (const auto& m : j["models"]) {
      ModelEntry e;
      e.model = m.at("model").get<std::string>();
      if (m.contains("q")) e.q = m["q"].get<int>();
      if (m.contains("adjust")) e.adjust = m["adjust"].get<bool>();
      c.models.push_back(e);
    }
  }
  if (c.replicates < 1) throw std::runtime_error("replicates must be >= 1");
  return c;
}

void write_study_config(const StudyConfig& c, const std::string& path) {
  nlohmann::json j;
  j["rows"] = c.rows;
  j["cols"] = c.cols;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["beta_true"] = {c.beta_true(0), c.beta_true(1), c.beta_true(2)};
  j["basis_iterations"] = c.basis_iterations;
  j["basis_burn_in"] = c.basis_burn_in;
  j["car_iterations"] = c.car_iterations;
  j["car_burn_in"] = c.car_burn_in;
  j["bootstrap_b"] = c.bootstrap_b;
  j["parallelism"] = c.parallelism;
  j["models"] = nlohmann::json::array();
  for (const auto& m : c.models)
    j["models"].push_back({{"model", m.model}, {"q", m.q}, {"adjust", m.adjust}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_study_config: cannot open " + path);
  out << j.dump(2) << "\n";
}

namespace {

FitResult fit_logistic_model(const Dataset& data) {
  const LogisticFit glm = fit_logistic(data.z, data.X);
  FitResult res;
  res.method = "logistic";
  res.converged = glm.converged;
  res.iterations = glm.iterations;
  res.estimates = glm.beta;
  const double zq = norm_quantile(0.975);
  for (Eigen::Index j = 0; j < glm.beta.size(); ++j) {
    res.names.push_back("beta" + std::to_string(j));
    const double se = std::sqrt(glm.cov(j, j));
    res.intervals.push_back({glm.beta(j) - zq * se, glm.beta(j) + zq * se});
  }
  const Eigen::VectorXd eta = data.X * glm.beta;
  res.p_hat.resize(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) res.p_hat(i) = logistic(eta(i));
  return res;
}

}  // namespace

FitResult fit_model(const ModelEntry& entry, const Dataset& data, const ArealGraph& graph,
                    const StudyConfig& config, std::uint64_t seed) {
  if (entry.model == "logistic") return fit_logistic_model(data);
  if (entry.model == "autologistic")
    return fit_autologistic(data.z, graph, data.X, "sandwich", config.bootstrap_b, seed);
  if (entry.model == "copcar") return fit_cml(data.z, graph, data.X, config.bootstrap_b, seed);
  if (entry.model == "car") {
    MixedModelSpec spec;
    spec.kind = MixedKind::car;
    // Near-intrinsic range: with rho free the posterior alternates between a
    // stable regime and a degenerate one (tau -> 0, psi saturating the
    // observations) that ruins the fitted surface; pinning rho at the
    // intrinsic limit reproduces the traditional-CAR behavior.
    spec.rho_fixed = true;
    spec.rho_value = 0.9999;
    PosteriorSamples s =
        fit_car_mcmc(data.z, graph, data.X, spec, config.car_iterations, config.car_burn_in, seed);
    return posterior_summary(s);
  }
  if (entry.model == "rsr" || entry.model == "bsf") {
    MixedModelSpec spec;
    spec.kind = mixed_kind_from_string(entry.model);
    spec.q = entry.q;
    PosteriorSamples s = fit_basis_mcmc(data.z, graph, data.X, spec, config.basis_iterations,
                                        config.basis_burn_in, seed);
    if (entry.adjust) adjusted_beta(s, data.X, graph, seed + 1);
    return posterior_summary(s);
  }
  throw std::invalid_argument("fit_model: unknown model " + entry.model);
}

StudyReport run_study(const StudyConfig& config) {
  const ArealGraph graph = build_lattice(config.rows, config.cols);
  const Covariates cov = generate_covariates(graph, config.beta_true);

  // Expand entries into report rows; an adjusted rsr/bsf entry yields both
  // the plain and the adjusted row from one chain.
  struct Task {
    ModelEntry entry;
    bool adjusted_row;  // this row reports beta_tilde
  };
  std::vector<Task> tasks;
  for (const auto& e : config.models) {
    ModelEntry plain = e;
    plain.adjust = false;
    tasks.push_back({plain, false});
    if (e.adjust) tasks.push_back({e, true});
  }

  // Shared bases (the big eigendecompositions) computed once.
  Eigen::MatrixXd X0(graph.n, 2);
  X0.col(0).setOnes();
  X0.col(1) = cov.x1;
  int rsr_qmax = 0, bsf_qmax = 0;
  for (const auto& t : tasks) {
    if (t.entry.model == "rsr") rsr_qmax = std::max(rsr_qmax, t.entry.q);
    if (t.entry.model == "bsf") bsf_qmax = std::max(bsf_qmax, t.entry.q);
  }
  std::optional<BasisContext> rsr_ctx, bsf_ctx;
  if (rsr_qmax > 0) rsr_ctx = make_basis_context(graph, X0, MixedKind::rsr, rsr_qmax);
  if (bsf_qmax > 0) bsf_ctx = make_basis_context(graph, X0, MixedKind::bsf, bsf_qmax);

  const std::size_t n_tasks = tasks.size();
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(config.replicates) * n_tasks);
  std::mutex err_mutex;
  std::vector<std::string> errors;

  const auto run_replicate = [&](int rep) {
    const Dataset data = simulate_replicate(cov, config.seed + static_cast<std::uint64_t>(rep));
    for (std::size_t t = 0; t < n_tasks; ++t) {
      if (tasks[t].adjusted_row) continue;  // filled alongside the plain row
      const ModelEntry& entry = tasks[t].entry;
      const std::uint64_t fit_seed =
          config.seed + 7919 * static_cast<std::uint64_t>(rep + 1) + 104729 * (t + 1);
      ReplicateRecord rec;
      rec.replicate = rep;
      rec.model = entry.label();
      ReplicateRecord adj_rec = rec;
      const bool has_adj = t + 1 < n_tasks && tasks[t + 1].adjusted_row;
      if (has_adj) adj_rec.model = tasks[t + 1].entry.label();
      try {
        if (entry.model == "rsr" || entry.model == "bsf") {
          MixedModelSpec spec;
          spec.kind = mixed_kind_from_string(entry.model);
          spec.q = entry.q;
          const BasisContext* ctx =
              spec.kind == MixedKind::rsr ? &*rsr_ctx : &*bsf_ctx;
          PosteriorSamples s = fit_basis_mcmc(data.z, graph, data.X, spec, config.basis_iterations,
                                              config.basis_burn_in, fit_seed, ctx);
          const FitResult plain = posterior_summary(s);
          rec.ok = true;
          rec.estimate = plain.estimate("beta1");
          rec.interval = plain.interval("beta1");
          rec.pred_error = (plain.p_hat - data.p_true).norm();
          if (has_adj) {
            adjusted_beta(s, data.X, graph, fit_seed + 1);
            const FitResult adj = posterior_summary(s);
            adj_rec.ok = true;
            adj_rec.estimate = adj.estimate("beta1");
            adj_rec.interval = adj.interval("beta1");
            adj_rec.pred_error = (adj.p_hat - data.p_true).norm();
          }
        } else {
          ModelEntry plain_entry = entry;
          plain_entry.adjust = false;
          const FitResult fit = fit_model(plain_entry, data, graph, config, fit_seed);
          rec.ok = true;
          rec.estimate = fit.estimate("beta1");
          rec.interval = fit.interval("beta1");
          rec.pred_error = (fit.p_hat - data.p_true).norm();
        }
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(err_mutex);
        errors.push_back(rec.model + " replicate " + std::to_string(rep) + ": " + ex.what());
      }
      records[static_cast<std::size_t>(rep) * n_tasks + t] = rec;
      if (has_adj) records[static_cast<std::size_t>(rep) * n_tasks + t + 1] = adj_rec;
    }
  };

  const int workers = std::max(1, std::min(config.parallelism, config.replicates));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int rep = next.fetch_add(1); rep < config.replicates; rep = next.fetch_add(1))
        run_replicate(rep);
    });
  }
  for (auto& th : pool) th.join();

  StudyReport report;
  report.records = records;
  const double truth = 1.0;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    ModelRow row;
    row.model = tasks[t].entry.label();
    std::vector<double> ests, widths, preds;
    int covered = 0, type2 = 0, ok_count = 0;
    for (int rep = 0; rep < config.replicates; ++rep) {
      const ReplicateRecord& rec = records[static_cast<std::size_t>(rep) * n_tasks + t];
      if (!rec.ok) {
        ++row.failures;
        continue;
      }
      ++ok_count;
      ests.push_back(rec.estimate);
      widths.push_back(rec.interval.width());
      preds.push_back(rec.pred_error);
      // An interval containing both 0 and 1 increments both counters.
      if (rec.interval.contains(truth)) ++covered;
      if (rec.interval.contains(0.0)) ++type2;
    }
    if (row.failures * 10 > config.replicates) {
      std::string detail;
      for (const auto& e : errors)
        if (e.rfind(row.model + " ", 0) == 0) detail += "\n  " + e;
      throw std::runtime_error("run_study: model " + row.model + " failed " +
                               std::to_string(row.failures) + " of " +
                               std::to_string(config.replicates) + " replicates" + detail);
    }
    row.median_estimate = median(ests);
    row.median_ci_width = median(widths);
    row.median_pred_error = median(preds);
    double mse = 0.0;
    for (double e : ests) mse += (e - truth) * (e - truth);
    row.mse = mse / ok_count;
    row.coverage_rate = static_cast<double>(covered) / ok_count;
    row.type2_rate = static_cast<double>(type2) / ok_count;
    report.rows.push_back(row);
  }
  return report;
}

void write_report_csv(const StudyReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
  out << "model,median_estimate,median_ci_width,mse,coverage_rate,type2_rate,median_pred_error,"
         "failures\n";
  out.precision(6);
  for (const auto& r : report.rows) {
    out << r.model << "," << r.median_estimate << "," << r.median_ci_width << "," << r.mse << ","
        << r.coverage_rate << "," << r.type2_rate << "," << r.median_pred_error << ","
        << r.failures << "\n";
  }
}

namespace {

void write_grid(const Eigen::VectorXd& v, int rows, int cols, const std::string& path) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw std::invalid_argument("write_grid: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_grid: cannot open " + path);
  out.precision(17);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out << (c ? "," : "") << v(r * cols + c);
    out << "\n";
  }
}

}  // namespace

void emit_surfaces(const Dataset& data, const std::vector<FitResult>& fits, int rows, int cols,
                   const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_grid(data.p_true, rows, cols, dir + "/p_true.csv");
  for (const auto& fit : fits) write_grid(fit.p_hat, rows, cols, dir + "/p_hat_" + fit.method + ".csv");
}

void write_dataset_csv(const ArealGraph& lattice, const Covariates& cov, const Dataset& data,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  out << "id,row,col,x,y,x1,x2,s,p,z\n";
  out.precision(17);
  const int cols = static_cast<int>(std::lround(
      cov.x.size() > 1 ? (cov.x.maxCoeff() - cov.x.minCoeff()) < 1e-15 ? 1 : 0 : 1));
  (void)cols;
  // Recover row/col from the row-major ordering via the coordinate grid.
  int ncols = 1;
  for (int i = 1; i < lattice.n; ++i)
    if (lattice.coord_y(i) != lattice.coord_y(0)) {
      ncols = i;
      break;
    }
  for (int i = 0; i < lattice.n; ++i) {
    out << i << "," << i / ncols << "," << i % ncols << "," << cov.x(i) << "," << cov.y(i) << ","
        << cov.x1(i) << "," << cov.x2(i) << "," << cov.s(i) << "," << cov.p(i) << "," << data.z(i)
        << "\n";
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("id,", 0) != 0)
    throw std::runtime_error("read_dataset_csv: unexpected header: " + header);
  std::vector<std::array<double, 10>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 10> vals{};
    std::stringstream ss(line);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',') && k < 10) vals[static_cast<std::size_t>(k++)] = std::stod(cell);
    if (k != 10) throw std::runtime_error("read_dataset_csv: malformed line: " + line);
    rows.push_back(vals);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Dataset data;
  data.z.resize(n);
  data.X.resize(n, 2);
  data.p_true.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.X(i, 0) = 1.0;
    data.X(i, 1) = rows[static_cast<std::size_t>(i)][5];  // x1
    data.p_true(i) = rows[static_cast<std::size_t>(i)][8];
    data.z(i) = rows[static_cast<std::size_t>(i)][9];
  }
  return data;
}

}  // namespace spreg
