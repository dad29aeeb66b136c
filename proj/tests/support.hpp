#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tad/autodiff.hpp"
#include "tad/tensor.hpp"

namespace testing {

// Small seeded generator used by property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal(double stddev = 1.0) { return std::normal_distribution<double>(0.0, stddev)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  tad::Tensor tensor(tad::Shape shape, double lo = -1.0, double hi = 1.0) {
    tad::Tensor t(std::move(shape));
    for (double& v : t.data()) v = uniform(lo, hi);
    return t;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rel_err(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Largest relative error between tape gradients and central differences of
// f over every element of every input.
inline double gradient_check(const std::function<tad::Var(const std::vector<tad::Var>&)>& f,
                             std::vector<tad::Tensor> inputs, double h = 1e-5) {
  tad::GradTape tape;
  std::vector<tad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const tad::Var loss = f(vars);
  const tad::Gradients g = tape.backward(loss);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const tad::Tensor* gi = g.of(vars[i]);
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double keep = inputs[i][k];
      auto eval = [&](double x) {
        inputs[i][k] = x;
        std::vector<tad::Var> cs;
        for (const auto& t : inputs) cs.push_back(tad::Var::constant(t));
        return f(cs).value().item();
      };
      const double numeric = (eval(keep + h) - eval(keep - h)) / (2.0 * h);
      inputs[i][k] = keep;
      const double analytic = gi ? (*gi)[k] : 0.0;
      worst = std::max(worst, rel_err(analytic, numeric));
    }
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tad_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
