#pragma once

#include <cstddef>
#include <vector>

#include "tad/autodiff.hpp"

namespace tad {

struct AdamWConfig {
  double lr = 0.00045;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with bias correction and decoupled weight decay. Moment buffers are
// aligned with the parameter set's order; parameters without a gradient in
// a step are left untouched.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(ParameterSet& params, const Gradients& grads);

  std::size_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t step_ = 0;
};

}  // namespace tad
