#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tad/dataset.hpp"
#include "tad/evaluation.hpp"
#include "tad/feature_grid.hpp"
#include "tad/geometry.hpp"
#include "tad/hydraview.hpp"
#include "tad/io.hpp"
#include "tad/swgcn.hpp"

namespace tad::pipeline {

struct TrainConfig {
  int stage = 1;
  std::size_t epochs = 30;
  double lr = 0.00045;
  double weight_decay = 0.01;
  std::size_t batch = 4;
  std::uint64_t seed = 1;
  std::size_t views = 12;  // virtual cameras rendered for training
  std::size_t window = 16;
  std::size_t stride = 16;
  double clip_norm = 5.0;
  double occlusion_margin = 0.0;
  // Stage 1: put all views of a window in the same batch instead of one
  // random view per window.
  bool grouped_views = false;
  // Stage 2: train each sequence on a random contiguous block of cameras.
  bool view_subsets = true;
  geom::RigConfig rig;
  swgcn::SwgcnConfig swgcn;
  hydra::HydraConfig hydra;

  void validate() const;
  // Flat key/value form; the CLI's `--key value` flags use the same keys.
  io::json to_json() const;
  static TrainConfig from_json(const io::json& flat);
};

// Flat config keys with their default values.
const io::json& default_config();
// Applies `--key value` style overrides (values parsed to the default's
// type) on top of `base`; unknown keys throw.
io::json apply_overrides(io::json base, const std::map<std::string, std::string>& overrides);

struct EpochLog {
  int stage = 1;
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_metric = 0.0;  // stage 1: running accuracy
  double val_metric = 0.0;    // stage 1: val accuracy, stage 2: val mAP@0.5
};

struct LabeledWindow {
  std::string seq;
  std::size_t index = 0;
  std::size_t label = 0;
  std::vector<Tensor> views;  // encoder inputs [F, J, 3], one per camera
};

std::vector<geom::VirtualCamera> make_rig(const TrainConfig& config);

// Renders every window of every sequence through every camera.
std::vector<LabeledWindow> prepare_windows(const std::vector<data::SkeletonSequence>& sequences,
                                           const TrainConfig& config,
                                           const std::vector<geom::VirtualCamera>& cameras);

// Fraction of (window, view) pairs whose argmax logit equals the label.
double window_accuracy(const swgcn::Swgcn& model, const std::vector<LabeledWindow>& windows);

struct Stage1Result {
  swgcn::Swgcn model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

// Trains the window encoder and writes stage1.ckpt (frozen), config.json,
// manifest.json and log.csv into out_dir.
Stage1Result train_stage1(const TrainConfig& config, const std::filesystem::path& manifest_path,
                          const std::filesystem::path& out_dir);

// Centered windows of a sequence, in window order.
std::vector<geom::SkeletonWindow3D> sequence_windows(const data::SkeletonSequence& seq,
                                                     std::size_t window, std::size_t stride);

// Ground-truth segments in window units (runs of frame_targets).
std::vector<eval::Segment> window_ground_truth(const data::SkeletonSequence& seq, std::size_t window,
                                               std::size_t stride);

// Feature grid of a sequence over `cameras`, cached under cache_dir when given.
FeatureGrid sequence_features(const swgcn::Swgcn& encoder, const data::SkeletonSequence& seq,
                              const std::vector<geom::VirtualCamera>& cameras,
                              const TrainConfig& config, const std::filesystem::path& cache_dir = {});

struct Stage2Result {
  hydra::HydraView model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_map = 0.0;
  std::uint64_t encoder_hash_before = 0;
  std::uint64_t encoder_hash_after = 0;
};

// Trains HydraView on cached feature grids from a frozen stage-1 encoder;
// writes stage2.ckpt, features/, manifest.json and log.csv into out_dir.
Stage2Result train_stage2(const TrainConfig& config, const std::filesystem::path& manifest_path,
                          const std::filesystem::path& stage1_ckpt, const std::filesystem::path& out_dir);

// Per-window class probabilities [T, K] using the first `views` cameras.
Tensor infer(const swgcn::Swgcn& encoder, const hydra::HydraView& model,
             const data::SkeletonSequence& seq, std::size_t views, const TrainConfig& config);

// Runs infer on every sequence and evaluates against window ground truth.
eval::EvalReport evaluate_split(const swgcn::Swgcn& encoder, const hydra::HydraView& model,
                                const std::vector<data::SkeletonSequence>& sequences,
                                std::size_t views, const TrainConfig& config,
                                const std::vector<double>& thresholds = eval::default_thresholds(),
                                std::vector<eval::Segment>* detections = nullptr);

}  // namespace tad::pipeline
