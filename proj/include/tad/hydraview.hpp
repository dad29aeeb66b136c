#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "tad/autodiff.hpp"
#include "tad/feature_grid.hpp"
#include "tad/io.hpp"
#include "tad/ssm.hpp"

namespace tad::hydra {

// Output view tokens of a same-padded convolution with stride s over V views.
std::size_t strided_length(std::size_t views, std::size_t stride);

// m: [V, T, C]; weight: [K_v * K_t * C, C_out] with row (i * K_t + j) * C + c.
// out[k, t] = sum_{i, j} W[i, j]^T m[k * s_v + i - p_v, t + j - p_t], zero
// outside the grid; p_v and p_t split the same-padding total with the
// smaller half before. Output [ceil(V / s_v), T, C_out].
Var view_strided_conv(const Var& m, const Var& weight, std::size_t kernel_v, std::size_t kernel_t,
                      std::size_t stride_v);

// Validity of each conv output cell: any valid input view in its receptive
// field at the same time step.
std::vector<std::uint8_t> strided_mask(const std::vector<std::uint8_t>& valid, std::size_t views,
                                       std::size_t steps, std::size_t kernel_v,
                                       std::size_t stride_v);

// Strand r of a length-`len` sequence holds indices r, r + step, r + 2 step, ...
std::vector<std::vector<std::size_t>> strand_indices(std::size_t len, std::size_t step);

template <class T>
std::vector<std::vector<T>> strand_split(const std::vector<T>& seq, std::size_t step) {
  if (step == 0) throw std::invalid_argument("strand step must be at least 1");
  std::vector<std::vector<T>> strands(std::min(step, seq.size()));
  for (std::size_t i = 0; i < seq.size(); ++i) strands[i % step].push_back(seq[i]);
  return strands;
}

template <class T>
std::vector<T> strand_merge(const std::vector<std::vector<T>>& strands) {
  std::size_t total = 0;
  for (const auto& s : strands) total += s.size();
  std::vector<T> out;
  out.reserve(total);
  const std::size_t step = strands.size();
  for (std::size_t i = 0; i < total; ++i) out.push_back(strands.at(i % step).at(i / step));
  return out;
}

enum Direction : std::size_t { kTimeForward = 0, kTimeBackward = 1, kViewForward = 2, kViewBackward = 3 };

// Scan orders over the rows (v * T + t) of a V x T grid. Temporal scans run
// per view along each strand of `step`; view scans run per time column.
ssm::ScanOrder grid_order(std::size_t views, std::size_t steps, Direction dir, std::size_t step = 1);

struct Ss2dResult {
  Var sum;                       // [V, T, C]
  std::vector<Var> directions;  // four [V*T, C] masked branch outputs
};

// Four selective scans over the grid, summed in fixed direction order.
// Invalid cells enter as zeros and leave as zeros.
Ss2dResult ss2d_scan(const Var& x, const std::vector<ssm::ScanWeights>& weights,
                     const std::vector<std::uint8_t>& valid, std::size_t step = 1);

struct ViewMambaConfig {
  std::size_t kernel_v = 2;
  std::size_t kernel_t = 3;
  std::size_t stride_v = 2;
  std::size_t out_channels = 192;
  std::size_t state_dim = 16;
  bool residual = false;

  void validate() const;
  io::json to_json() const;
  static ViewMambaConfig from_json(const io::json& doc);
};

struct HydraConfig {
  std::size_t in_channels = 384;
  std::vector<std::size_t> scales{1, 2, 3};
  ViewMambaConfig block;
  std::size_t fuse_dim = 192;
  std::size_t head_hidden = 192;
  std::size_t classes = 4;
  bool input_norm = true;

  void validate() const;
  io::json to_json() const;
  static HydraConfig from_json(const io::json& doc);
};

// Multi-scale fuser on per-scale outputs [V_s, T, C] with masks: masked
// view mean-pool, dense + layer norm per scale, bidirectional scan across
// scales per time step, mean over scales, two-layer head. [T, K] logits.
struct FuserBinding {
  std::vector<std::size_t> dense;  // per scale: weight, bias, gamma, beta
  std::size_t scan_fwd = 0, scan_bwd = 0, head = 0;
};
Var multiscale_fuse(const std::vector<Var>& scales, const std::vector<std::vector<std::uint8_t>>& masks,
                    const std::vector<Var>& bound, const FuserBinding& binding);

class HydraView {
 public:
  HydraView(HydraConfig config, std::uint64_t seed);

  // [T, K] per-window logits. Parameters are watched on `tape` when given.
  Var forward(const FeatureGrid& grid, GradTape* tape = nullptr) const;
  // Sigmoid of the logits, [T, K].
  Tensor predict(const FeatureGrid& grid) const;

  // Parameter view for callers that bind their own leaves (gradient checks).
  Var forward_bound(const FeatureGrid& grid, const std::vector<Var>& bound) const;

  const HydraConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  io::json hyper() const;
  void save(const std::filesystem::path& path, std::uint64_t step) const;
  static HydraView load(const std::filesystem::path& path);

 private:
  struct Branch {
    std::size_t conv = 0;
    std::size_t scans[4] = {0, 0, 0, 0};
  };
  HydraConfig config_;
  ParameterSet params_;
  std::size_t input_norm_ = 0;
  std::vector<Branch> branches_;
  FuserBinding fuser_;
};

}  // namespace tad::hydra
