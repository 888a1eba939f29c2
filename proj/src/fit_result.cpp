#include "spreg/fit_result.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace spreg {

int FitResult::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw std::out_of_range("FitResult: no parameter named " + name);
}

double FitResult::estimate(const std::string& name) const { return estimates(index_of(name)); }

const Interval& FitResult::interval(const std::string& name) const {
  return intervals[static_cast<std::size_t>(index_of(name))];
}

void write_fit_json(const FitResult& fit, const std::string& path) {
  nlohmann::json j;
  j["method"] = fit.method;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  nlohmann::json est = nlohmann::json::object();
  nlohmann::json intv = nlohmann::json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    est[fit.names[i]] = fit.estimates(static_cast<Eigen::Index>(i));
    intv[fit.names[i]] = {fit.intervals[i].lower, fit.intervals[i].upper};
  }
  j["estimates"] = est;
  j["intervals"] = intv;
  j["p_hat"] = std::vector<double>(fit.p_hat.data(), fit.p_hat.data() + fit.p_hat.size());
  j["warnings"] = fit.warnings;
  j["extras"] = fit.extras;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_fit_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

FitResult read_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_fit_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  FitResult fit;
  fit.method = j.at("method").get<std::string>();
  fit.converged = j.at("converged").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  for (const auto& [name, val] : j.at("estimates").items()) {
    fit.names.push_back(name);
    fit.estimates.conservativeResize(fit.estimates.size() + 1);
    fit.estimates(fit.estimates.size() - 1) = val.get<double>();
    const auto& iv = j.at("intervals").at(name);
    fit.intervals.push_back({iv[0].get<double>(), iv[1].get<double>()});
  }
  const auto ph = j.at("p_hat").get<std::vector<double>>();
  fit.p_hat = Eigen::Map<const Eigen::VectorXd>(ph.data(), static_cast<Eigen::Index>(ph.size()));
  if (j.contains("warnings")) fit.warnings = j["warnings"].get<std::vector<std::string>>();
  if (j.contains("extras")) fit.extras = j["extras"].get<std::map<std::string, double>>();
  return fit;
}

}  // namespace spreg
