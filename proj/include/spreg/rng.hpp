#pragma once

#include <cstdint>
#include <random>

namespace spreg {

/// Seeded RNG wrapper. All stochastic routines take one of these (or a seed)
/// so that results are reproducible run to run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return unif_(gen_); }
  double normal() { return norm_(gen_); }
  double normal(double mean, double sd) { return mean + sd * norm_(gen_); }
  bool bernoulli(double p) { return unif_(gen_) < p; }
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(gen_);
  }
  long poisson(double mean) {
    std::poisson_distribution<long> p(mean);
    return p(gen_);
  }
  // uniform integer in [0, n)
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(gen_);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace spreg
