#include "tad/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tad {

void AdamW::step(ParameterSet& params, const Gradients& grads) {
  if (params.frozen()) throw std::logic_error("AdamW: parameter set is frozen");
  for (const auto& e : grads.params()) {
    bool known = false;
    for (const auto& p : params.items()) known = known || (&p == e.param);
    if (!known) throw std::invalid_argument("AdamW: gradient for a parameter outside the set");
  }
  if (m_.empty()) {
    for (const auto& p : params.items()) {
      m_.emplace_back(p.value.shape(), 0.0);
      v_.emplace_back(p.value.shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("AdamW: parameter set changed size");

  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  std::size_t i = 0;
  for (auto& p : params.items()) {
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    ++i;
    const Tensor* g = grads.of(p);
    if (!g) continue;
    if (g->shape() != p.value.shape() || m.shape() != p.value.shape()) {
      throw ShapeError("AdamW: gradient shape " + shape_str(g->shape()) + " for parameter " +
                       p.name + " of shape " + shape_str(p.value.shape()));
    }
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double gk = (*g)[k];
      double& w = p.value[k];
      w -= config_.lr * config_.weight_decay * w;
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * gk;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * gk * gk;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace tad
