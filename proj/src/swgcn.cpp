#include "tad/swgcn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "tad/nn.hpp"
#include "tad/ops.hpp"

namespace tad::swgcn {

void SwgcnConfig::validate() const {
  if (dim == 0 || blocks == 0 || frames == 0 || joints == 0 || in_channels == 0) {
    throw std::invalid_argument("swgcn: dimensions must be positive");
  }
  if (kernel_t % 2 == 0) throw std::invalid_argument("swgcn: temporal kernel must be odd");
  if (kernel_t > frames) throw std::invalid_argument("swgcn: temporal kernel exceeds window length");
  if (groups == 0 || dim % groups != 0) {
    throw std::invalid_argument("swgcn: dim must be divisible by groups");
  }
  if (classes < 2) throw std::invalid_argument("swgcn: need at least 2 classes");
}

io::json SwgcnConfig::to_json() const {
  return io::json{{"dim", dim},         {"blocks", blocks}, {"kernel_t", kernel_t},
                  {"groups", groups},   {"classes", classes}, {"frames", frames},
                  {"joints", joints},   {"in_channels", in_channels}};
}

SwgcnConfig SwgcnConfig::from_json(const io::json& doc) {
  SwgcnConfig c;
  c.dim = doc.at("dim").get<std::size_t>();
  c.blocks = doc.at("blocks").get<std::size_t>();
  c.kernel_t = doc.at("kernel_t").get<std::size_t>();
  c.groups = doc.at("groups").get<std::size_t>();
  c.classes = doc.at("classes").get<std::size_t>();
  c.frames = doc.at("frames").get<std::size_t>();
  c.joints = doc.at("joints").get<std::size_t>();
  c.in_channels = doc.at("in_channels").get<std::size_t>();
  c.validate();
  return c;
}

Tensor normalized_adjacency(std::size_t joints, const std::vector<data::Edge>& edges) {
  Tensor a(Shape{joints, joints});
  for (std::size_t j = 0; j < joints; ++j) a.at(j, j) = 1.0;
  for (const auto& [p, q] : edges) {
    if (p >= joints || q >= joints) throw std::out_of_range("adjacency: edge joint out of range");
    if (p == q) continue;
    a.at(p, q) = 1.0;
    a.at(q, p) = 1.0;
  }
  std::vector<double> inv_sqrt(joints);
  for (std::size_t i = 0; i < joints; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < joints; ++j) deg += a.at(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < joints; ++i) {
    for (std::size_t j = 0; j < joints; ++j) a.at(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  }
  return a;
}

Var graph_conv(const Var& x, const Tensor& adjacency, const Var& weight) {
  if (x.value().rank() != 3) throw ShapeError("graph_conv: x must be [G, J, C]");
  return ops::joint_mix(ops::matmul(x, weight), adjacency);
}

Var temporal_conv(const Var& x, std::size_t kernel_t, const Var& weight, const Var& bias) {
  const Shape& s = x.shape();
  if (s.size() != 3 && s.size() != 4) throw ShapeError("temporal_conv: x must be [B, F, J, C]");
  const std::size_t b = s.size() == 4 ? s[0] : 1;
  const std::size_t off = s.size() == 4 ? 1 : 0;
  const std::size_t f = s[off], j = s[off + 1], c = s[off + 2];
  if (kernel_t % 2 == 0) throw std::invalid_argument("temporal_conv: kernel must be odd");
  if (kernel_t > f) throw std::invalid_argument("temporal_conv: kernel exceeds frame count");
  if (weight.value().rank() != 2 || weight.shape()[0] != kernel_t * c) {
    throw ShapeError("temporal_conv: weight must be [k_t * C, C_out]");
  }
  const std::size_t pad = kernel_t / 2;
  std::vector<std::size_t> table;
  table.reserve(b * f * j * kernel_t);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t t = 0; t < f; ++t) {
      for (std::size_t q = 0; q < j; ++q) {
        for (std::size_t o = 0; o < kernel_t; ++o) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + o) - static_cast<std::ptrdiff_t>(pad);
          table.push_back(src < 0 || src >= static_cast<std::ptrdiff_t>(f)
                              ? ops::kNoRow
                              : (bi * f + static_cast<std::size_t>(src)) * j + q);
        }
      }
    }
  }
  Var cols = ops::gather_rows(x, table, kernel_t);
  Var y = ops::add_bias(ops::matmul(cols, weight), bias);
  Shape out = s;
  out.back() = weight.shape()[1];
  return ops::reshape(y, out);
}

Tensor window_input(const geom::ProjectedWindow& projected) {
  const geom::ProjectedWindow norm = geom::normalize_window(projected);
  const std::size_t f = norm.frames(), j = norm.joint_count();
  Tensor x(Shape{f, j, 3});
  for (std::size_t t = 0; t < f; ++t) {
    for (std::size_t q = 0; q < j; ++q) {
      if (!norm.is_visible(t, q)) continue;
      x.at(t, q, 0) = norm.joints2d.at(t, q, 0);
      x.at(t, q, 1) = norm.joints2d.at(t, q, 1);
      x.at(t, q, 2) = 1.0;
    }
  }
  return x;
}

Tensor stack_inputs(const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("stack_inputs: no inputs");
  const Shape& s = inputs.front().shape();
  Shape out{inputs.size()};
  out.insert(out.end(), s.begin(), s.end());
  std::vector<double> data;
  data.reserve(shape_numel(out));
  for (const auto& t : inputs) {
    if (t.shape() != s) throw ShapeError("stack_inputs: inconsistent window shapes");
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor(out, std::move(data));
}

Swgcn::Swgcn(SwgcnConfig config, std::vector<data::Edge> edges, std::uint64_t seed)
    : config_(config), edges_(std::move(edges)) {
  config_.validate();
  adjacency_ = normalized_adjacency(config_.joints, edges_);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random = [&](Shape shape, double stddev) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = stddev * normal(rng);
    return t;
  };
  const std::size_t d = config_.dim;
  std::size_t cin = config_.in_channels;
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    params_.add(p + ".gc", random({cin, d}, std::sqrt(2.0 / static_cast<double>(cin))));
    params_.add(p + ".gn_gamma", Tensor(Shape{d}, 1.0));
    params_.add(p + ".gn_beta", Tensor(Shape{d}));
    params_.add(p + ".tc", random({config_.kernel_t * d, d},
                                  std::sqrt(2.0 / static_cast<double>(config_.kernel_t * d))));
    params_.add(p + ".tc_bias", Tensor(Shape{d}));
    cin = d;
  }
  params_.add("head.weight", random({d, config_.classes}, 1.0 / std::sqrt(static_cast<double>(d))));
  params_.add("head.bias", Tensor(Shape{config_.classes}));
}

Swgcn::Output Swgcn::forward(const Tensor& inputs, GradTape* tape) const {
  const auto& c = config_;
  if (inputs.rank() != 4 || inputs.dim(1) != c.frames || inputs.dim(2) != c.joints ||
      inputs.dim(3) != c.in_channels) {
    throw ShapeError("swgcn: input " + shape_str(inputs.shape()) + " does not match [B, " +
                     std::to_string(c.frames) + ", " + std::to_string(c.joints) + ", " +
                     std::to_string(c.in_channels) + "]");
  }
  std::vector<Var> w;
  if (tape) {
    w = tape->watch_all(params_);
  } else {
    for (const auto& p : params_.items()) w.push_back(Var::constant(p.value));
  }
  const std::size_t b = inputs.dim(0), f = c.frames, j = c.joints, d = c.dim;
  Var x = Var::constant(inputs.reshaped({b * f, j, c.in_channels}));
  std::size_t k = 0;
  for (std::size_t blk = 0; blk < c.blocks; ++blk) {
    Var h = graph_conv(x, adjacency_, w[k]);
    h = nn::group_norm(ops::reshape(h, {b, f * j, d}), c.groups, w[k + 1], w[k + 2]);
    h = ops::relu(h);
    h = temporal_conv(ops::reshape(h, {b, f, j, d}), c.kernel_t, w[k + 3], w[k + 4]);
    x = ops::reshape(h, {b * f, j, d});
    k += 5;
  }
  std::vector<std::vector<ops::PoolTerm>> groups(b);
  const double inv = 1.0 / static_cast<double>(f * j);
  for (std::size_t i = 0; i < b; ++i) {
    groups[i].reserve(f * j);
    for (std::size_t r = 0; r < f * j; ++r) groups[i].push_back({i * f * j + r, inv});
  }
  Var feat = ops::pool_rows(x, groups);
  Var logits = ops::add_bias(ops::matmul(feat, w[k]), w[k + 1]);
  return {feat, logits};
}

io::json Swgcn::hyper() const {
  return io::json{{"model", "swgcn"}, {"config", config_.to_json()}, {"edges", edges_}};
}

void Swgcn::save(const std::filesystem::path& path, std::uint64_t step) const {
  save_checkpoint(path, params_, hyper(), step);
}

Swgcn Swgcn::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.hyper.value("model", "") != "swgcn") {
    throw std::runtime_error("checkpoint " + path.string() + " does not hold a swgcn encoder");
  }
  Swgcn model(SwgcnConfig::from_json(ck.hyper.at("config")),
              ck.hyper.at("edges").get<std::vector<data::Edge>>(), 0);
  assign_parameters(model.params_, ck.params);
  if (ck.params.frozen()) model.freeze();
  return model;
}

FeatureGrid extract_feature_grid(const Swgcn& encoder,
                                 const std::vector<geom::SkeletonWindow3D>& windows,
                                 const std::vector<geom::VirtualCamera>& cameras,
                                 const geom::TorsoJoints& torso, const ExtractOptions& options) {
  if (!encoder.frozen()) throw std::logic_error("feature extraction requires a frozen encoder");
  if (windows.empty() || cameras.empty()) throw std::invalid_argument("extract: empty windows or rig");
  const std::size_t v_count = cameras.size(), t_count = windows.size();
  const std::size_t d = encoder.config().dim;
  FeatureGrid grid;
  grid.values = Tensor(Shape{v_count, t_count, d});
  grid.valid.assign(v_count * t_count, 0);

  std::vector<Tensor> pending;
  std::vector<std::size_t> cells;
  auto flush = [&]() {
    if (pending.empty()) return;
    const Tensor feats = encoder.encode(stack_inputs(pending));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      std::copy_n(feats.data().begin() + static_cast<std::ptrdiff_t>(i * d), d,
                  grid.values.data().begin() + static_cast<std::ptrdiff_t>(cells[i] * d));
      grid.valid[cells[i]] = 1;
    }
    pending.clear();
    cells.clear();
  };
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto centered = geom::center_on_root(windows[t]);
    const auto views = geom::render_views(centered, cameras, torso, options.occlusion_margin);
    for (std::size_t v = 0; v < v_count; ++v) {
      if (views[v].visible_count() == 0) continue;
      pending.push_back(window_input(views[v]));
      cells.push_back(v * t_count + t);
      if (pending.size() >= options.batch) flush();
    }
  }
  flush();
  grid.validate();
  return grid;
}

}  // namespace tad::swgcn
