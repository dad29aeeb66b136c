#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tad/tensor.hpp"

namespace tad {

struct Parameter {
  std::string name;
  Tensor value;
};

// Ordered, named parameter collection owned by a model. Frozen sets are
// treated as constants by GradTape::watch and rejected by optimizers.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  const Parameter* find(const std::string& name) const;

  std::deque<Parameter>& items() { return params_; }
  const std::deque<Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t hash() const;

 private:
  std::deque<Parameter> params_;
  bool frozen_ = false;
};

class GradTape;

namespace detail {
struct Node {
  Tensor value;
  bool requires_grad = false;
  GradTape* tape = nullptr;
  std::size_t id = 0;
  const Parameter* param = nullptr;
};
}  // namespace detail

// Handle to a value that may participate in reverse-mode differentiation.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  GradTape* tape() const { return node_ ? node_->tape : nullptr; }
  bool defined() const { return static_cast<bool>(node_); }

 private:
  friend class GradTape;
  friend class Gradients;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Result of GradTape::backward: gradient buffers keyed by leaf identity.
class Gradients {
 public:
  const Tensor* of(const Var& v) const;
  const Tensor* of(const Parameter& p) const;
  Tensor* mutable_of(const Parameter& p);

  struct Entry {
    const Parameter* param;
    Tensor grad;
  };
  std::vector<Entry>& params() { return params_; }
  const std::vector<Entry>& params() const { return params_; }

  double global_norm() const;
  // Rescales parameter gradients so their global norm is at most max_norm.
  // Returns the pre-clip norm.
  double clip_global_norm(double max_norm);
  // Adds other's parameter gradients into this (matching by parameter).
  void accumulate(const Gradients& other);
  void scale(double factor);

 private:
  friend class GradTape;
  const GradTape* tape_ = nullptr;
  std::vector<std::pair<std::size_t, Tensor>> leaves_;  // node id -> grad
  std::vector<Entry> params_;
};

// Receives the gradient of an op's output and accumulates into the inputs'
// gradient buffers. A null buffer marks an input that needs no gradient.
using BackwardFn = std::function<void(const Tensor& grad_out, std::vector<Tensor*>& grad_in)>;

// Ordered record of executed operations. Backward replays them in exact
// reverse execution order. A tape is confined to one thread.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Leaf that requires a gradient.
  Var variable(Tensor value);
  // Leaf bound to a model parameter; constant when the owning set is frozen.
  Var watch(const Parameter& param, bool frozen = false);
  std::vector<Var> watch_all(const ParameterSet& params);

  std::size_t op_count() const { return ops_.size(); }
  bool owns(const Var& v) const;

  Gradients backward(const Var& loss);

  // Used by operations: records `out` as produced from `inputs`. When no
  // input requires a gradient the result is a plain constant and nothing is
  // recorded.
  static Var record(const char* name, Tensor out, const std::vector<Var>& inputs,
                    BackwardFn backward);

 private:
  struct Op {
    const char* name;
    std::vector<std::shared_ptr<detail::Node>> inputs;
    std::shared_ptr<detail::Node> output;
    BackwardFn backward;
  };

  Var make_leaf(Tensor value, const Parameter* param);

  std::vector<Op> ops_;
  std::vector<std::shared_ptr<detail::Node>> leaves_;
  std::size_t next_id_ = 0;
};

}  // namespace tad
