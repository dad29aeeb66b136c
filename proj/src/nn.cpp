#include "tad/nn.hpp"

#include "tad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tad::nn {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var group_norm(const Var& x, std::size_t groups, const Var& gamma, const Var& beta, double eps) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("group_norm: expected [N, C] or [N, S, C], got " + shape_str(s));
  }
  const std::size_t n = s[0];
  const std::size_t spatial = s.size() == 3 ? s[1] : 1;
  const std::size_t c = s.back();
  if (groups == 0 || c % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("group_norm: affine parameters must have shape [" + std::to_string(c) + "]");
  }
  const std::size_t cg = c / groups;
  const double count = static_cast<double>(spatial * cg);
  const auto xv = x.value().data();
  const auto gv = gamma.value().data();
  const auto bv = beta.value().data();

  Tensor out(s);
  Tensor xhat(s);
  std::vector<double> inv_std(n * groups);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      double mu = 0.0;
      for (std::size_t p = 0; p < spatial; ++p) {
        const std::size_t base = (i * spatial + p) * c + g * cg;
        for (std::size_t k = 0; k < cg; ++k) mu += xv[base + k];
      }
      mu /= count;
      double var = 0.0;
      for (std::size_t p = 0; p < spatial; ++p) {
        const std::size_t base = (i * spatial + p) * c + g * cg;
        for (std::size_t k = 0; k < cg; ++k) var += (xv[base + k] - mu) * (xv[base + k] - mu);
      }
      var /= count;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[i * groups + g] = is;
      for (std::size_t p = 0; p < spatial; ++p) {
        const std::size_t base = (i * spatial + p) * c + g * cg;
        for (std::size_t k = 0; k < cg; ++k) {
          const double h = (xv[base + k] - mu) * is;
          xhat[base + k] = h;
          out[base + k] = gv[g * cg + k] * h + bv[g * cg + k];
        }
      }
    }
  }

  return GradTape::record(
      "group_norm", std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), gamma, n, spatial, c, groups, cg,
       count](const Tensor& go, std::vector<Tensor*>& gi) {
        const auto gv = gamma.value().data();
        for (std::size_t i = 0; i < go.size(); ++i) {
          const std::size_t ch = i % c;
          if (gi[1]) (*gi[1])[ch] += go[i] * xhat[i];
          if (gi[2]) (*gi[2])[ch] += go[i];
        }
        if (!gi[0]) return;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t g = 0; g < groups; ++g) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (std::size_t p = 0; p < spatial; ++p) {
              const std::size_t base = (i * spatial + p) * c + g * cg;
              for (std::size_t k = 0; k < cg; ++k) {
                const double gh = go[base + k] * gv[g * cg + k];
                mean_g += gh;
                mean_gx += gh * xhat[base + k];
              }
            }
            mean_g /= count;
            mean_gx /= count;
            const double is = inv_std[i * groups + g];
            for (std::size_t p = 0; p < spatial; ++p) {
              const std::size_t base = (i * spatial + p) * c + g * cg;
              for (std::size_t k = 0; k < cg; ++k) {
                const double gh = go[base + k] * gv[g * cg + k];
                (*gi[0])[base + k] += is * (gh - mean_g - xhat[base + k] * mean_gx);
              }
            }
          }
        }
      });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (x.value().rank() == 0) throw ShapeError("layer_norm: needs rank >= 1");
  const std::size_t c = x.shape().back();
  const Shape original = x.shape();
  Var flat = ops::reshape(x, Shape{x.value().size() / c, c});
  return ops::reshape(group_norm(flat, 1, gamma, beta, eps), original);
}

Var cross_entropy(const Var& logits, const std::vector<std::size_t>& labels) {
  const Shape& s = logits.shape();
  if (s.empty() || s.size() > 2) throw ShapeError("cross_entropy: logits must be [K] or [B, K]");
  const std::size_t k = s.back();
  const std::size_t b = s.size() == 2 ? s[0] : 1;
  if (k < 2) throw ShapeError("cross_entropy: need at least 2 classes");
  if (labels.size() != b) throw ShapeError("cross_entropy: label count does not match batch");
  for (std::size_t l : labels) {
    if (l >= k) throw std::out_of_range("cross_entropy: label " + std::to_string(l) +
                                        " out of range for " + std::to_string(k) + " classes");
  }
  const auto z = logits.value().data();
  Tensor probs(Shape{b, k});
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(row[j] - mx);
    const double lse = mx + std::log(se);
    loss += lse - row[labels[i]];
    for (std::size_t j = 0; j < k; ++j) probs.at(i, j) = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(b);
  return GradTape::record("cross_entropy", Tensor::scalar(loss), {logits},
                          [probs = std::move(probs), labels, b, k](const Tensor& g,
                                                                   std::vector<Tensor*>& gi) {
                            const double scale = g[0] / static_cast<double>(b);
                            for (std::size_t i = 0; i < b; ++i) {
                              for (std::size_t j = 0; j < k; ++j) {
                                const double y = j == labels[i] ? 1.0 : 0.0;
                                (*gi[0])[i * k + j] += scale * (probs.at(i, j) - y);
                              }
                            }
                          });
}

Var bce_multilabel(const Var& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("bce_multilabel: logits " + shape_str(logits.shape()) + " vs targets " +
                     shape_str(targets.shape()));
  }
  if (targets.empty()) throw ShapeError("bce_multilabel: empty input");
  for (double y : targets.data()) {
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("bce_multilabel: targets must be 0 or 1");
  }
  const auto z = logits.value().data();
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    loss += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double n = static_cast<double>(z.size());
  return GradTape::record("bce_multilabel", Tensor::scalar(loss / n), {logits},
                          [logits, targets, n](const Tensor& g, std::vector<Tensor*>& gi) {
                            const auto z = logits.value().data();
                            const double scale = g[0] / n;
                            for (std::size_t i = 0; i < z.size(); ++i) {
                              (*gi[0])[i] += scale * (sigmoid(z[i]) - targets[i]);
                            }
                          });
}

}  // namespace tad::nn
