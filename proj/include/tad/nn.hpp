#pragma once

#include <cstddef>
#include <vector>

#include "tad/autodiff.hpp"

namespace tad::nn {

inline constexpr double kNormEps = 1e-5;

// x: [N, S, C] or [N, C]. Each sample n and channel group is normalized to
// zero mean and unit (population) variance over S x C/groups values, then
// scaled by gamma[c] and shifted by beta[c].
Var group_norm(const Var& x, std::size_t groups, const Var& gamma, const Var& beta,
               double eps = kNormEps);

// Normalizes each row of x: [..., C] over its last axis.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = kNormEps);

// logits: [B, K] or [K]; mean over the batch of -log softmax(logits)[label].
Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels);

// Mean over all elements of the per-element binary cross-entropy with logits.
// targets must hold only 0 or 1 and match the logits' shape.
Var bce_multilabel(const Var& logits, const Tensor& targets);

double softplus(double x);
double sigmoid(double x);

}  // namespace tad::nn
