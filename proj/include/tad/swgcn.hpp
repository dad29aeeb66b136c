#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tad/autodiff.hpp"
#include "tad/checkpoint.hpp"
#include "tad/dataset.hpp"
#include "tad/feature_grid.hpp"
#include "tad/geometry.hpp"
#include "tad/io.hpp"

namespace tad::swgcn {

struct SwgcnConfig {
  std::size_t dim = 384;
  std::size_t blocks = 3;
  std::size_t kernel_t = 5;
  std::size_t groups = 8;
  std::size_t classes = 5;  // action classes plus background
  std::size_t frames = 16;
  std::size_t joints = 15;
  std::size_t in_channels = 3;  // x, y, visibility

  void validate() const;
  io::json to_json() const;
  static SwgcnConfig from_json(const io::json& doc);
};

// D^-1/2 (A + I) D^-1/2 for an undirected edge list.
Tensor normalized_adjacency(std::size_t joints, const std::vector<data::Edge>& edges);

// x: [G, J, C_in] (G stacked frames), weight: [C_in, C_out] -> per frame A X W.
Var graph_conv(const Var& x, const Tensor& adjacency, const Var& weight);

// Same-padded stride-1 convolution along frames, independently per joint.
// x: [B, F, J, C] or [F, J, C]; weight: [k_t * C, C_out] with row index
// o * C + c for tap o; bias: [C_out]. Output keeps the input's leading shape.
Var temporal_conv(const Var& x, std::size_t kernel_t, const Var& weight, const Var& bias);

// Normalized (x, y, visibility) encoder input [F, J, 3] of a projected window.
Tensor window_input(const geom::ProjectedWindow& projected);

// Stacks per-window inputs into [B, F, J, 3].
Tensor stack_inputs(const std::vector<Tensor>& inputs);

class Swgcn {
 public:
  Swgcn(SwgcnConfig config, std::vector<data::Edge> edges, std::uint64_t seed);

  struct Output {
    Var features;  // [B, dim]
    Var logits;    // [B, classes]
  };
  // inputs: [B, F, J, in_channels]. With a tape, parameters are watched on
  // it (unless frozen); without one the pass is gradient-free.
  Output forward(const Tensor& inputs, GradTape* tape = nullptr) const;
  Tensor encode(const Tensor& inputs) const { return forward(inputs).features.value(); }

  const SwgcnConfig& config() const { return config_; }
  const std::vector<data::Edge>& edges() const { return edges_; }
  const Tensor& adjacency() const { return adjacency_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  void freeze() { params_.freeze(); }
  bool frozen() const { return params_.frozen(); }

  io::json hyper() const;
  void save(const std::filesystem::path& path, std::uint64_t step) const;
  // Rebuilds the architecture from the checkpoint header and loads weights.
  static Swgcn load(const std::filesystem::path& path);

 private:
  SwgcnConfig config_;
  std::vector<data::Edge> edges_;
  Tensor adjacency_;
  ParameterSet params_;
};

struct ExtractOptions {
  double occlusion_margin = 0.0;
  std::size_t batch = 32;
};

// M[v, t] = features of window t rendered through camera v. Cells whose
// rendering has no visible joint are invalid and zero. Requires a frozen
// encoder.
FeatureGrid extract_feature_grid(const Swgcn& encoder,
                                 const std::vector<geom::SkeletonWindow3D>& windows,
                                 const std::vector<geom::VirtualCamera>& cameras,
                                 const geom::TorsoJoints& torso, const ExtractOptions& options = {});

}  // namespace tad::swgcn
