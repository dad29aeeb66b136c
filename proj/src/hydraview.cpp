#include "tad/hydraview.hpp"

#include <cmath>
#include <random>
#include <string>

#include "tad/checkpoint.hpp"
#include "tad/nn.hpp"
#include "tad/ops.hpp"

namespace tad::hydra {

namespace {

std::size_t view_pad_before(std::size_t views, std::size_t kernel_v, std::size_t stride_v) {
  const std::size_t out = strided_length(views, stride_v);
  const std::size_t span = (out - 1) * stride_v + kernel_v;
  return span > views ? (span - views) / 2 : 0;
}

std::vector<double> mask_weights(const std::vector<std::uint8_t>& valid) {
  return {valid.begin(), valid.end()};
}

}  // namespace

std::size_t strided_length(std::size_t views, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("view stride must be at least 1");
  return (views + stride - 1) / stride;
}

Var view_strided_conv(const Var& m, const Var& weight, std::size_t kernel_v, std::size_t kernel_t,
                      std::size_t stride_v) {
  if (stride_v == 0) throw std::invalid_argument("view_strided_conv: stride must be at least 1");
  if (kernel_v == 0 || kernel_t == 0) throw std::invalid_argument("view_strided_conv: empty kernel");
  if (m.value().rank() != 3) throw ShapeError("view_strided_conv: input must be [V, T, C]");
  const std::size_t v = m.dim(0), t = m.dim(1), c = m.dim(2);
  if (weight.value().rank() != 2 || weight.dim(0) != kernel_v * kernel_t * c) {
    throw ShapeError("view_strided_conv: weight must be [K_v * K_t * C, C_out], got " +
                     shape_str(weight.shape()));
  }
  const std::size_t v_out = strided_length(v, stride_v);
  const auto pv = static_cast<std::ptrdiff_t>(view_pad_before(v, kernel_v, stride_v));
  const auto pt = static_cast<std::ptrdiff_t>((kernel_t - 1) / 2);
  std::vector<std::size_t> table;
  table.reserve(v_out * t * kernel_v * kernel_t);
  for (std::size_t k = 0; k < v_out; ++k) {
    for (std::size_t s = 0; s < t; ++s) {
      for (std::size_t i = 0; i < kernel_v; ++i) {
        for (std::size_t j = 0; j < kernel_t; ++j) {
          const std::ptrdiff_t vi = static_cast<std::ptrdiff_t>(k * stride_v + i) - pv;
          const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(s + j) - pt;
          const bool inside = vi >= 0 && vi < static_cast<std::ptrdiff_t>(v) && ti >= 0 &&
                              ti < static_cast<std::ptrdiff_t>(t);
          table.push_back(inside ? static_cast<std::size_t>(vi) * t + static_cast<std::size_t>(ti)
                                 : ops::kNoRow);
        }
      }
    }
  }
  Var cols = ops::gather_rows(m, table, kernel_v * kernel_t);
  return ops::reshape(ops::matmul(cols, weight), {v_out, t, weight.dim(1)});
}

std::vector<std::uint8_t> strided_mask(const std::vector<std::uint8_t>& valid, std::size_t views,
                                       std::size_t steps, std::size_t kernel_v,
                                       std::size_t stride_v) {
  if (valid.size() != views * steps) throw ShapeError("strided_mask: mask must be V x T");
  const std::size_t v_out = strided_length(views, stride_v);
  const auto pv = static_cast<std::ptrdiff_t>(view_pad_before(views, kernel_v, stride_v));
  std::vector<std::uint8_t> out(v_out * steps, 0);
  for (std::size_t k = 0; k < v_out; ++k) {
    for (std::size_t i = 0; i < kernel_v; ++i) {
      const std::ptrdiff_t vi = static_cast<std::ptrdiff_t>(k * stride_v + i) - pv;
      if (vi < 0 || vi >= static_cast<std::ptrdiff_t>(views)) continue;
      for (std::size_t t = 0; t < steps; ++t) {
        if (valid[static_cast<std::size_t>(vi) * steps + t]) out[k * steps + t] = 1;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> strand_indices(std::size_t len, std::size_t step) {
  std::vector<std::size_t> seq(len);
  for (std::size_t i = 0; i < len; ++i) seq[i] = i;
  return strand_split(seq, step);
}

ssm::ScanOrder grid_order(std::size_t views, std::size_t steps, Direction dir, std::size_t step) {
  ssm::ScanOrder order;
  const bool reverse = dir == kTimeBackward || dir == kViewBackward;
  if (dir == kTimeForward || dir == kTimeBackward) {
    const auto strands = strand_indices(steps, step);
    for (std::size_t v = 0; v < views; ++v) {
      for (const auto& strand : strands) {
        std::vector<std::size_t> seq;
        seq.reserve(strand.size());
        for (std::size_t t : strand) seq.push_back(v * steps + t);
        if (reverse) std::reverse(seq.begin(), seq.end());
        order.push_back(std::move(seq));
      }
    }
  } else {
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<std::size_t> seq(views);
      for (std::size_t v = 0; v < views; ++v) seq[v] = v * steps + t;
      if (reverse) std::reverse(seq.begin(), seq.end());
      order.push_back(std::move(seq));
    }
  }
  return order;
}

Ss2dResult ss2d_scan(const Var& x, const std::vector<ssm::ScanWeights>& weights,
                     const std::vector<std::uint8_t>& valid, std::size_t step) {
  if (x.value().rank() != 3) throw ShapeError("ss2d_scan: input must be [V, T, C]");
  if (weights.size() != 4) throw std::invalid_argument("ss2d_scan: four direction weight sets required");
  const std::size_t v = x.dim(0), t = x.dim(1), c = x.dim(2);
  if (valid.size() != v * t) throw ShapeError("ss2d_scan: mask must be V x T");
  const auto mw = mask_weights(valid);
  Var u = ops::mul_rows(ops::reshape(x, {v * t, c}), mw);
  Ss2dResult res;
  Var total;
  for (std::size_t d = 0; d < 4; ++d) {
    Var y = ssm::selective_scan(u, weights[d], grid_order(v, t, static_cast<Direction>(d), step));
    y = ops::mul_rows(y, mw);
    res.directions.push_back(y);
    total = d == 0 ? y : ops::add(total, y);
  }
  res.sum = ops::reshape(total, {v, t, c});
  return res;
}

void ViewMambaConfig::validate() const {
  if (kernel_v == 0 || kernel_t == 0) throw std::invalid_argument("viewmamba: kernel sizes must be >= 1");
  if (stride_v == 0) throw std::invalid_argument("viewmamba: view stride must be >= 1");
  if (out_channels == 0 || state_dim == 0) {
    throw std::invalid_argument("viewmamba: channels and state dim must be >= 1");
  }
}

io::json ViewMambaConfig::to_json() const {
  return io::json{{"kernel_v", kernel_v},         {"kernel_t", kernel_t},
                  {"stride_v", stride_v},         {"out_channels", out_channels},
                  {"state_dim", state_dim},       {"residual", residual}};
}

ViewMambaConfig ViewMambaConfig::from_json(const io::json& doc) {
  ViewMambaConfig c;
  c.kernel_v = doc.at("kernel_v").get<std::size_t>();
  c.kernel_t = doc.at("kernel_t").get<std::size_t>();
  c.stride_v = doc.at("stride_v").get<std::size_t>();
  c.out_channels = doc.at("out_channels").get<std::size_t>();
  c.state_dim = doc.at("state_dim").get<std::size_t>();
  c.residual = doc.at("residual").get<bool>();
  c.validate();
  return c;
}

void HydraConfig::validate() const {
  block.validate();
  if (in_channels == 0 || fuse_dim == 0 || head_hidden == 0) {
    throw std::invalid_argument("hydraview: dimensions must be positive");
  }
  if (scales.empty()) throw std::invalid_argument("hydraview: at least one scale required");
  for (std::size_t s : scales) {
    if (s == 0) throw std::invalid_argument("hydraview: temporal scale must be >= 1");
  }
  if (classes == 0) throw std::invalid_argument("hydraview: need at least one class");
}

io::json HydraConfig::to_json() const {
  return io::json{{"in_channels", in_channels}, {"scales", scales},
                  {"block", block.to_json()},   {"fuse_dim", fuse_dim},
                  {"head_hidden", head_hidden}, {"classes", classes},
                  {"input_norm", input_norm}};
}

HydraConfig HydraConfig::from_json(const io::json& doc) {
  HydraConfig c;
  c.in_channels = doc.at("in_channels").get<std::size_t>();
  c.scales = doc.at("scales").get<std::vector<std::size_t>>();
  c.block = ViewMambaConfig::from_json(doc.at("block"));
  c.fuse_dim = doc.at("fuse_dim").get<std::size_t>();
  c.head_hidden = doc.at("head_hidden").get<std::size_t>();
  c.classes = doc.at("classes").get<std::size_t>();
  c.input_norm = doc.at("input_norm").get<bool>();
  c.validate();
  return c;
}

Var multiscale_fuse(const std::vector<Var>& scales, const std::vector<std::vector<std::uint8_t>>& masks,
                    const std::vector<Var>& bound, const FuserBinding& binding) {
  if (scales.empty() || scales.size() != masks.size() || scales.size() != binding.dense.size()) {
    throw ShapeError("multiscale_fuse: scale count mismatch");
  }
  const std::size_t t = scales.front().dim(1), c = scales.front().dim(2);
  std::vector<Var> projected;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    const Var& s = scales[i];
    if (s.value().rank() != 3 || s.dim(1) != t || s.dim(2) != c) {
      throw ShapeError("multiscale_fuse: scale outputs must share T and C");
    }
    const std::size_t v = s.dim(0);
    if (masks[i].size() != v * t) throw ShapeError("multiscale_fuse: mask must be V x T");
    std::vector<std::vector<ops::PoolTerm>> groups(t);
    for (std::size_t step = 0; step < t; ++step) {
      std::size_t n = 0;
      for (std::size_t k = 0; k < v; ++k) n += masks[i][k * t + step];
      for (std::size_t k = 0; k < v; ++k) {
        if (masks[i][k * t + step]) groups[step].push_back({k * t + step, 1.0 / static_cast<double>(n)});
      }
    }
    const std::size_t d = binding.dense[i];
    Var pooled = ops::pool_rows(ops::reshape(s, {v * t, c}), groups);
    Var dense = ops::add_bias(ops::matmul(pooled, bound.at(d)), bound.at(d + 1));
    projected.push_back(nn::layer_norm(dense, bound.at(d + 2), bound.at(d + 3)));
  }
  const std::size_t n_scales = scales.size();
  Var stacked = ops::concat_rows(projected);  // row = scale * T + t
  ssm::ScanOrder fwd, bwd;
  for (std::size_t step = 0; step < t; ++step) {
    std::vector<std::size_t> seq(n_scales);
    for (std::size_t s = 0; s < n_scales; ++s) seq[s] = s * t + step;
    fwd.push_back(seq);
    std::reverse(seq.begin(), seq.end());
    bwd.push_back(std::move(seq));
  }
  Var z = ops::add(ssm::selective_scan(stacked, ssm::bind_scan(bound, binding.scan_fwd), fwd),
                   ssm::selective_scan(stacked, ssm::bind_scan(bound, binding.scan_bwd), bwd));
  std::vector<std::vector<ops::PoolTerm>> mean_groups(t);
  for (std::size_t step = 0; step < t; ++step) {
    for (std::size_t s = 0; s < n_scales; ++s) {
      mean_groups[step].push_back({s * t + step, 1.0 / static_cast<double>(n_scales)});
    }
  }
  Var fused = ops::pool_rows(z, mean_groups);
  const std::size_t h = binding.head;
  Var hidden = ops::relu(ops::add_bias(ops::matmul(fused, bound.at(h)), bound.at(h + 1)));
  return ops::add_bias(ops::matmul(hidden, bound.at(h + 2)), bound.at(h + 3));
}

HydraView::HydraView(HydraConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random = [&](Shape shape, double stddev) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = stddev * normal(rng);
    return t;
  };
  const auto& b = config_.block;
  const std::size_t c = config_.in_channels, co = b.out_channels, f = config_.fuse_dim;
  if (config_.input_norm) {
    input_norm_ = params_.size();
    params_.add("input_norm.gamma", Tensor(Shape{c}, 1.0));
  }
  for (std::size_t s : config_.scales) {
    const std::string p = "branch" + std::to_string(s);
    Branch br;
    br.conv = params_.size();
    const std::size_t fan_in = b.kernel_v * b.kernel_t * c;
    params_.add(p + ".conv", random({fan_in, co}, 1.0 / std::sqrt(static_cast<double>(fan_in))));
    for (std::size_t d = 0; d < 4; ++d) {
      br.scans[d] = ssm::add_scan_params(params_, p + ".scan" + std::to_string(d), co, b.state_dim, rng);
    }
    branches_.push_back(br);
  }
  for (std::size_t i = 0; i < config_.scales.size(); ++i) {
    const std::string p = "fuse" + std::to_string(i);
    fuser_.dense.push_back(params_.size());
    params_.add(p + ".weight", random({co, f}, 1.0 / std::sqrt(static_cast<double>(co))));
    params_.add(p + ".bias", Tensor(Shape{f}));
    params_.add(p + ".ln_gamma", Tensor(Shape{f}, 1.0));
    params_.add(p + ".ln_beta", Tensor(Shape{f}));
  }
  fuser_.scan_fwd = ssm::add_scan_params(params_, "fuse.scan_fwd", f, b.state_dim, rng);
  fuser_.scan_bwd = ssm::add_scan_params(params_, "fuse.scan_bwd", f, b.state_dim, rng);
  fuser_.head = params_.size();
  const std::size_t h = config_.head_hidden;
  params_.add("head.w1", random({f, h}, std::sqrt(2.0 / static_cast<double>(f))));
  params_.add("head.b1", Tensor(Shape{h}));
  params_.add("head.w2", random({h, config_.classes}, 1.0 / std::sqrt(static_cast<double>(h))));
  params_.add("head.b2", Tensor(Shape{config_.classes}));
}

Var HydraView::forward(const FeatureGrid& grid, GradTape* tape) const {
  std::vector<Var> bound;
  if (tape) {
    bound = tape->watch_all(params_);
  } else {
    for (const auto& p : params_.items()) bound.push_back(Var::constant(p.value));
  }
  return forward_bound(grid, bound);
}

Var HydraView::forward_bound(const FeatureGrid& grid, const std::vector<Var>& bound) const {
  grid.validate();
  if (bound.size() != params_.size()) throw std::invalid_argument("hydraview: parameter binding size mismatch");
  const std::size_t v = grid.views(), t = grid.steps(), c = grid.channels();
  if (c != config_.in_channels) {
    throw ShapeError("hydraview: grid has " + std::to_string(c) + " channels, model expects " +
                     std::to_string(config_.in_channels));
  }
  const auto& b = config_.block;
  Var x = Var::constant(grid.values);
  if (config_.input_norm) {
    // No shift: all-zero cells stay zero.
    const Var no_shift = Var::constant(Tensor(Shape{c}));
    Var rows = nn::layer_norm(ops::reshape(x, {v * t, c}), bound[input_norm_], no_shift);
    x = ops::reshape(ops::mul_rows(rows, mask_weights(grid.valid)), {v, t, c});
  }
  std::vector<Var> outs;
  std::vector<std::vector<std::uint8_t>> masks;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const Branch& br = branches_[i];
    Var y = view_strided_conv(x, bound[br.conv], b.kernel_v, b.kernel_t, b.stride_v);
    auto mask = strided_mask(grid.valid, v, t, b.kernel_v, b.stride_v);
    std::vector<ssm::ScanWeights> w;
    for (std::size_t d = 0; d < 4; ++d) w.push_back(ssm::bind_scan(bound, br.scans[d]));
    Var z = ss2d_scan(y, w, mask, config_.scales[i]).sum;
    if (b.residual) {
      const std::size_t vo = y.dim(0), co = y.dim(2);
      z = ops::add(z, ops::reshape(ops::mul_rows(ops::reshape(y, {vo * t, co}), mask_weights(mask)),
                                   {vo, t, co}));
    }
    outs.push_back(z);
    masks.push_back(std::move(mask));
  }
  return multiscale_fuse(outs, masks, bound, fuser_);
}

Tensor HydraView::predict(const FeatureGrid& grid) const {
  Tensor p = forward(grid).value();
  for (double& x : p.data()) x = nn::sigmoid(x);
  return p;
}

io::json HydraView::hyper() const {
  return io::json{{"model", "hydraview"}, {"config", config_.to_json()}};
}

void HydraView::save(const std::filesystem::path& path, std::uint64_t step) const {
  save_checkpoint(path, params_, hyper(), step);
}

HydraView HydraView::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.hyper.value("model", "") != "hydraview") {
    throw std::runtime_error("checkpoint " + path.string() + " does not hold a hydraview model");
  }
  HydraView model(HydraConfig::from_json(ck.hyper.at("config")), 0);
  assign_parameters(model.params_, ck.params);
  return model;
}

}  // namespace tad::hydra
