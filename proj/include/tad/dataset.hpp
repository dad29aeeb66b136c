#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tad/geometry.hpp"
#include "tad/io.hpp"
#include "tad/tensor.hpp"

namespace tad::data {

using Edge = std::pair<std::size_t, std::size_t>;

struct SkeletonTopology {
  std::vector<std::string> joint_names;
  std::vector<Edge> edges;  // (parent, child)
  geom::TorsoJoints torso;

  std::size_t joints() const { return joint_names.size(); }
  bool is_tree() const;
};

inline constexpr std::size_t kMaxJoints = 15;
inline constexpr std::size_t kMinJoints = 5;

// Canonical body: pelvis, hips, shoulders, then limbs, neck and head. Every
// prefix of at least kMinJoints joints is itself a tree containing the four
// torso joints.
SkeletonTopology canonical_skeleton(std::size_t joints = kMaxJoints);

struct GroundTruthSegment {
  std::size_t cls = 0;
  std::size_t start = 0;  // frame, inclusive
  std::size_t end = 0;    // frame, exclusive

  bool operator==(const GroundTruthSegment&) const = default;
};

struct SkeletonSequence {
  std::string id;
  double fps = 30.0;
  Tensor frames;  // [N_f, J, 3]
  std::vector<std::vector<std::size_t>> labels;  // per-frame class sets
  SkeletonTopology topology;
  std::vector<std::string> class_names;
  std::vector<GroundTruthSegment> segments;

  std::size_t frame_count() const { return frames.empty() ? 0 : frames.dim(0); }
  std::size_t class_count() const { return class_names.size(); }
  void validate() const;
};

// Names of the motion primitives the generator can synthesize, one per class.
const std::vector<std::string>& primitive_bank();

struct GeneratorConfig {
  std::uint64_t seed = 7;
  std::size_t classes = 4;
  std::size_t joints = kMaxJoints;
  std::size_t sequences = 20;
  std::size_t frames = 320;
  double fps = 30.0;
  // Segment boundaries are multiples of this many frames.
  std::size_t boundary_quantum = 16;
  std::size_t min_action_quanta = 3;
  std::size_t max_action_quanta = 6;
  std::size_t min_idle_quanta = 1;
  std::size_t max_idle_quanta = 2;
  double joint_noise = 0.005;
  bool random_heading = true;
  std::string id_prefix = "seq";
};

// Sequences alternate idle spans (empty label sets) with labeled motion
// primitives. Classes are dealt round-robin from a seeded permutation so
// every class appears once enough segments exist.
std::vector<SkeletonSequence> generate_synthetic(const GeneratorConfig& config);

struct WindowBatch {
  std::vector<geom::SkeletonWindow3D> windows;
  std::vector<std::size_t> starts;
  std::vector<std::size_t> labels;  // class index, or `background` for idle windows
  std::size_t length = 0;
  std::size_t stride = 0;
  std::size_t background = 0;
};

std::size_t window_count(std::size_t frames, std::size_t length, std::size_t stride);

// Windows start at 0, stride, 2*stride, ...; a trailing partial window
// repeats the last frame. Label: majority vote of frame labels, idle frames
// voting for background (index = class count); ties go to the lower index.
WindowBatch split_windows(const SkeletonSequence& seq, std::size_t length, std::size_t stride);

// [T, K] multi-label targets: row t marks every class present in any frame
// of window t.
Tensor frame_targets(const SkeletonSequence& seq, std::size_t length, std::size_t stride);

// Per-frame label sets implied by a segment list.
std::vector<std::vector<std::size_t>> labels_from_segments(
    std::size_t frames, const std::vector<GroundTruthSegment>& segments);

// .skel file: framed JSON header + float32 joint payload.
void write_sequence(const std::filesystem::path& path, const SkeletonSequence& seq);
SkeletonSequence read_sequence(const std::filesystem::path& path);

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::size_t joints = kMaxJoints;
  double fps = 30.0;
  std::uint64_t seed = 0;
  std::vector<std::string> train, val, test;  // paths relative to the manifest

  io::json to_json() const;
  static DatasetManifest from_json(const io::json& doc);
};

struct SplitFractions {
  double val = 0.15;
  double test = 0.15;
};

// Writes one .skel per sequence plus manifest.json into `dir`; splits are
// contiguous in generation order (train, then val, then test).
DatasetManifest write_dataset(const std::filesystem::path& dir,
                              const std::vector<SkeletonSequence>& sequences,
                              const SplitFractions& split, std::uint64_t seed);
DatasetManifest read_manifest(const std::filesystem::path& manifest_path);
std::vector<SkeletonSequence> load_split(const std::filesystem::path& manifest_path,
                                         const std::vector<std::string>& files);

}  // namespace tad::data
