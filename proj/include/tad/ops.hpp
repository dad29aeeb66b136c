#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "tad/autodiff.hpp"

// Differentiable operations. Every op checks shapes, rejects non-finite
// results and records itself on the tape of its grad-requiring inputs.
namespace tad::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var neg(const Var& a);

// a: [..., C], bias: [C].
Var add_bias(const Var& a, const Var& bias);
// a: [R, ...], weights: R constant row weights.
Var mul_rows(const Var& a, const std::vector<double>& weights);

// a: [..., K] (leading axes flattened), b: [K, N] -> [..., N].
Var matmul(const Var& a, const Var& b);

Var relu(const Var& a);
Var exp(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
// ln(1 + e^x), stable for large |x|.
Var softplus(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
Var reshape(const Var& a, Shape shape);

// Concatenates rank>=1 tensors along axis 0.
Var concat_rows(const std::vector<Var>& parts);

inline constexpr std::size_t kNoRow = std::numeric_limits<std::size_t>::max();

// x: [R, C] (leading axes flattened). Output row i is the concatenation of
// input rows table[i*width .. i*width+width), kNoRow giving zeros.
// Result shape [table.size()/width, width*C].
Var gather_rows(const Var& x, const std::vector<std::size_t>& table, std::size_t width);

struct PoolTerm {
  std::size_t row;
  double weight;
};
// x: [R, C]. Output row g = sum over groups[g] of weight * x[row].
Var pool_rows(const Var& x, const std::vector<std::vector<PoolTerm>>& groups);

// x: [G, J, C], mix: constant [J, J]; y[g] = mix * x[g].
Var joint_mix(const Var& x, const Tensor& mix);

}  // namespace tad::ops
