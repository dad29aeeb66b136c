#include "tad/autodiff.hpp"

#include <cmath>
#include <cstring>

namespace tad {

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::uint64_t ParameterSet::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    for (std::size_t d : p.value.shape()) {
      std::uint64_t d64 = d;
      mix(&d64, sizeof d64);
    }
    mix(p.value.data().data(), p.value.size() * sizeof(double));
  }
  return h;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

const Tensor* Gradients::of(const Var& v) const {
  if (!v.node_ || v.node_->tape != tape_) return nullptr;
  for (const auto& [id, g] : leaves_) {
    if (id == v.node_->id) return &g;
  }
  return nullptr;
}

const Tensor* Gradients::of(const Parameter& p) const {
  for (const auto& e : params_) {
    if (e.param == &p) return &e.grad;
  }
  return nullptr;
}

Tensor* Gradients::mutable_of(const Parameter& p) {
  for (auto& e : params_) {
    if (e.param == &p) return &e.grad;
  }
  return nullptr;
}

double Gradients::global_norm() const {
  double sq = 0.0;
  for (const auto& e : params_) {
    for (double g : e.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double Gradients::clip_global_norm(double max_norm) {
  const double norm = global_norm();
  if (norm > max_norm && norm > 0.0) scale(max_norm / norm);
  return norm;
}

void Gradients::accumulate(const Gradients& other) {
  for (const auto& e : other.params_) {
    if (Tensor* mine = mutable_of(*e.param)) {
      if (mine->shape() != e.grad.shape()) throw ShapeError("gradient accumulate shape mismatch");
      for (std::size_t i = 0; i < mine->size(); ++i) (*mine)[i] += e.grad[i];
    } else {
      params_.push_back(e);
    }
  }
}

void Gradients::scale(double factor) {
  for (auto& e : params_) {
    for (double& g : e.grad.data()) g *= factor;
  }
}

Var GradTape::make_leaf(Tensor value, const Parameter* param) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->tape = this;
  node->id = next_id_++;
  node->param = param;
  leaves_.push_back(node);
  return Var(std::move(node));
}

Var GradTape::variable(Tensor value) { return make_leaf(std::move(value), nullptr); }

Var GradTape::watch(const Parameter& param, bool frozen) {
  if (frozen) return Var::constant(param.value);
  return make_leaf(param.value, &param);
}

std::vector<Var> GradTape::watch_all(const ParameterSet& params) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const auto& p : params.items()) out.push_back(watch(p, params.frozen()));
  return out;
}

bool GradTape::owns(const Var& v) const { return v.node_ && v.node_->tape == this; }

Var GradTape::record(const char* name, Tensor out, const std::vector<Var>& inputs,
                     BackwardFn backward) {
  if (!all_finite(out.data())) {
    throw NonFiniteError(std::string("non-finite value produced by ") + name);
  }
  GradTape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.requires_grad()) continue;
    if (tape && in.tape() != tape) {
      throw std::logic_error(std::string(name) + ": inputs recorded on different tapes");
    }
    tape = in.tape();
  }
  if (!tape) return Var::constant(std::move(out));

  auto node = std::make_shared<detail::Node>();
  node->value = std::move(out);
  node->requires_grad = true;
  node->tape = tape;
  node->id = tape->next_id_++;

  Op op{name, {}, node, std::move(backward)};
  op.inputs.reserve(inputs.size());
  for (const auto& in : inputs) op.inputs.push_back(in.node_);
  tape->ops_.push_back(std::move(op));
  return Var(std::move(node));
}

Gradients GradTape::backward(const Var& loss) {
  if (!owns(loss)) throw std::invalid_argument("backward: loss is not recorded on this tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }

  std::vector<Tensor> grads(next_id_);
  grads[loss.node_->id] = Tensor(loss.shape(), 1.0);

  std::vector<Tensor*> grad_in;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const Tensor& g_out = grads[it->output->id];
    if (g_out.empty()) continue;
    grad_in.assign(it->inputs.size(), nullptr);
    for (std::size_t i = 0; i < it->inputs.size(); ++i) {
      const auto& in = it->inputs[i];
      if (!in->requires_grad) continue;
      Tensor& g = grads[in->id];
      if (g.empty()) g = Tensor(in->value.shape(), 0.0);
      grad_in[i] = &g;
    }
    it->backward(g_out, grad_in);
  }

  Gradients result;
  result.tape_ = this;
  for (const auto& leaf : leaves_) {
    Tensor& g = grads[leaf->id];
    if (g.empty()) continue;
    if (leaf->param) result.params_.push_back({leaf->param, g});
    result.leaves_.emplace_back(leaf->id, std::move(g));
  }
  return result;
}

}  // namespace tad
