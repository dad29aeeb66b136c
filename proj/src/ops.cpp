#include "tad/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace tad::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

std::size_t last_dim(const char* op, const Var& a) {
  if (a.value().rank() == 0) throw ShapeError(std::string(op) + ": needs rank >= 1");
  return a.shape().back();
}

template <class F, class DF>
Var unary(const char* name, const Var& a, F f, DF df) {
  Tensor out(a.shape());
  const auto x = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  Tensor y = out;
  return GradTape::record(name, std::move(out), {a},
                          [a, y = std::move(y), df](const Tensor& g, std::vector<Tensor*>& gi) {
                            const auto x = a.value().data();
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              (*gi[0])[i] += g[i] * df(x[i], y[i]);
                            }
                          });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return GradTape::record("add", std::move(out), {a, b},
                          [](const Tensor& g, std::vector<Tensor*>& gi) {
                            for (Tensor* t : gi) {
                              if (!t) continue;
                              for (std::size_t i = 0; i < g.size(); ++i) (*t)[i] += g[i];
                            }
                          });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return GradTape::record("sub", std::move(out), {a, b},
                          [](const Tensor& g, std::vector<Tensor*>& gi) {
                            if (gi[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                            }
                            if (gi[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
                            }
                          });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return GradTape::record("mul", std::move(out), {a, b},
                          [a, b](const Tensor& g, std::vector<Tensor*>& gi) {
                            if (gi[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                (*gi[0])[i] += g[i] * b.value()[i];
                              }
                            }
                            if (gi[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                (*gi[1])[i] += g[i] * a.value()[i];
                              }
                            }
                          });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return GradTape::record("scale", std::move(out), {a},
                          [factor](const Tensor& g, std::vector<Tensor*>& gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += factor * g[i];
                          });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var add_bias(const Var& a, const Var& bias) {
  const std::size_t c = last_dim("add_bias", a);
  if (bias.shape() != Shape{c}) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " for input " +
                     shape_str(a.shape()));
  }
  Tensor out = a.value();
  const auto b = bias.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % c];
  return GradTape::record("add_bias", std::move(out), {a, bias},
                          [c](const Tensor& g, std::vector<Tensor*>& gi) {
                            if (gi[0]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                            }
                            if (gi[1]) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i % c] += g[i];
                            }
                          });
}

Var mul_rows(const Var& a, const std::vector<double>& weights) {
  if (a.value().rank() == 0 || a.shape()[0] != weights.size()) {
    throw ShapeError("mul_rows: " + std::to_string(weights.size()) + " weights for " +
                     shape_str(a.shape()));
  }
  const std::size_t width = weights.empty() ? 0 : a.value().size() / weights.size();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= weights[i / width];
  return GradTape::record("mul_rows", std::move(out), {a},
                          [weights, width](const Tensor& g, std::vector<Tensor*>& gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              (*gi[0])[i] += g[i] * weights[i / width];
                            }
                          });
}

Var matmul(const Var& a, const Var& b) {
  if (b.value().rank() != 2) throw ShapeError("matmul: rhs must be rank 2");
  const std::size_t k = last_dim("matmul", a);
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.value().size() / k;
  const std::size_t n = b.shape()[1];
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Tensor out(out_shape);
  MapMat(out.data().data(), m, n).noalias() =
      ConstMapMat(a.value().data().data(), m, k) * ConstMapMat(b.value().data().data(), k, n);
  return GradTape::record(
      "matmul", std::move(out), {a, b}, [a, b, m, k, n](const Tensor& g, std::vector<Tensor*>& gi) {
        ConstMapMat gm(g.data().data(), m, n);
        if (gi[0]) {
          MapMat(gi[0]->data().data(), m, k).noalias() +=
              gm * ConstMapMat(b.value().data().data(), k, n).transpose();
        }
        if (gi[1]) {
          MapMat(gi[1]->data().data(), k, n).noalias() +=
              ConstMapMat(a.value().data().data(), m, k).transpose() * gm;
        }
      });
}

Var relu(const Var& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var tanh(const Var& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(const Var& a) {
  return unary(
      "sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(
      "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return GradTape::record("sum", Tensor::scalar(s), {a},
                          [](const Tensor& g, std::vector<Tensor*>& gi) {
                            const double gv = g[0];
                            for (double& v : gi[0]->data()) v += gv;
                          });
}

Var mean(const Var& a) {
  if (a.value().empty()) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return GradTape::record("reshape", std::move(out), {a},
                          [](const Tensor& g, std::vector<Tensor*>& gi) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                          });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.value().rank() == 0 || Shape(p.shape().begin() + 1, p.shape().end()) != tail) {
      throw ShapeError("concat_rows: incompatible part " + shape_str(p.shape()));
    }
    offsets.push_back(rows);
    rows += p.shape()[0];
  }
  Shape out_shape = tail;
  out_shape.insert(out_shape.begin(), rows);
  Tensor out(out_shape);
  const std::size_t row_size = shape_numel(tail);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto src = parts[i].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + offsets[i] * row_size);
  }
  return GradTape::record("concat_rows", std::move(out), parts,
                          [offsets, row_size](const Tensor& g, std::vector<Tensor*>& gi) {
                            for (std::size_t i = 0; i < gi.size(); ++i) {
                              if (!gi[i]) continue;
                              const std::size_t base = offsets[i] * row_size;
                              for (std::size_t j = 0; j < gi[i]->size(); ++j) {
                                (*gi[i])[j] += g[base + j];
                              }
                            }
                          });
}

Var gather_rows(const Var& x, const std::vector<std::size_t>& table, std::size_t width) {
  const std::size_t c = last_dim("gather_rows", x);
  const std::size_t rows = x.value().size() / c;
  if (width == 0 || table.size() % width != 0) {
    throw ShapeError("gather_rows: table size not a multiple of width");
  }
  for (std::size_t r : table) {
    if (r != kNoRow && r >= rows) throw ShapeError("gather_rows: row index out of range");
  }
  const std::size_t out_rows = table.size() / width;
  Tensor out(Shape{out_rows, width * c});
  const double* src = x.value().data().data();
  double* dst = out.data().data();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i] == kNoRow) continue;
    std::copy_n(src + table[i] * c, c, dst + i * c);
  }
  return GradTape::record("gather_rows", std::move(out), {x},
                          [table, c](const Tensor& g, std::vector<Tensor*>& gi) {
                            double* gx = gi[0]->data().data();
                            const double* gg = g.data().data();
                            for (std::size_t i = 0; i < table.size(); ++i) {
                              if (table[i] == kNoRow) continue;
                              double* dst = gx + table[i] * c;
                              const double* src = gg + i * c;
                              for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                            }
                          });
}

Var pool_rows(const Var& x, const std::vector<std::vector<PoolTerm>>& groups) {
  const std::size_t c = last_dim("pool_rows", x);
  const std::size_t rows = x.value().size() / c;
  for (const auto& grp : groups) {
    for (const auto& t : grp) {
      if (t.row >= rows) throw ShapeError("pool_rows: row index out of range");
    }
  }
  Tensor out(Shape{groups.size(), c});
  const double* src = x.value().data().data();
  for (std::size_t gidx = 0; gidx < groups.size(); ++gidx) {
    double* dst = out.data().data() + gidx * c;
    for (const auto& t : groups[gidx]) {
      const double* row = src + t.row * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += t.weight * row[j];
    }
  }
  return GradTape::record("pool_rows", std::move(out), {x},
                          [groups, c](const Tensor& g, std::vector<Tensor*>& gi) {
                            double* gx = gi[0]->data().data();
                            for (std::size_t gidx = 0; gidx < groups.size(); ++gidx) {
                              const double* gg = g.data().data() + gidx * c;
                              for (const auto& t : groups[gidx]) {
                                double* dst = gx + t.row * c;
                                for (std::size_t j = 0; j < c; ++j) dst[j] += t.weight * gg[j];
                              }
                            }
                          });
}

Var joint_mix(const Var& x, const Tensor& mix) {
  if (x.value().rank() != 3 || mix.rank() != 2 || mix.dim(0) != x.shape()[1] ||
      mix.dim(1) != x.shape()[1]) {
    throw ShapeError("joint_mix: input " + shape_str(x.shape()) + " with mix " +
                     shape_str(mix.shape()));
  }
  const std::size_t groups = x.shape()[0], j = x.shape()[1], c = x.shape()[2];
  Tensor out(x.shape());
  ConstMapMat m(mix.data().data(), j, j);
  for (std::size_t g = 0; g < groups; ++g) {
    MapMat(out.data().data() + g * j * c, j, c).noalias() =
        m * ConstMapMat(x.value().data().data() + g * j * c, j, c);
  }
  return GradTape::record("joint_mix", std::move(out), {x},
                          [mix, groups, j, c](const Tensor& g, std::vector<Tensor*>& gi) {
                            ConstMapMat m(mix.data().data(), j, j);
                            for (std::size_t k = 0; k < groups; ++k) {
                              MapMat(gi[0]->data().data() + k * j * c, j, c).noalias() +=
                                  m.transpose() * ConstMapMat(g.data().data() + k * j * c, j, c);
                            }
                          });
}

}  // namespace tad::ops
