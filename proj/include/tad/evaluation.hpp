#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tad/io.hpp"
#include "tad/tensor.hpp"

namespace tad::eval {

struct Segment {
  std::size_t cls = 0;
  std::size_t start = 0;  // window, inclusive
  std::size_t end = 0;    // window, exclusive
  double confidence = 1.0;
  std::string seq;

  bool operator==(const Segment&) const = default;
};

// Maximal runs of windows with prob >= threshold, per class; confidence is
// the mean probability over the run.
std::vector<Segment> extract_segments(const Tensor& probs, double threshold = 0.5);

// |a & b| / |a | b| of half-open intervals.
double interval_iou(const Segment& a, const Segment& b);

// Detections ranked by descending confidence (stable), each matched to the
// unmatched same-sequence ground truth of highest IoU >= threshold. Returns
// the all-points interpolated AP; 0 when there are no detections.
double event_average_precision(const std::vector<Segment>& detections,
                               const std::vector<Segment>& ground_truth, std::size_t cls,
                               double iou_threshold);

struct ClassCounts {
  std::size_t tp = 0, fp = 0, missed = 0;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<std::string> class_names;
  std::vector<std::vector<double>> ap;  // [threshold][class], -1 when no GT
  std::vector<double> map;              // per threshold
  std::vector<std::vector<ClassCounts>> counts;  // [threshold][class]

  io::json to_json() const;
  std::string to_csv() const;
};

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{0.1, 0.3, 0.5};
  return t;
}

// Pools detections and ground truth of all sequences per class.
EvalReport evaluate(const std::vector<Segment>& detections, const std::vector<Segment>& ground_truth,
                    const std::vector<std::string>& class_names,
                    const std::vector<double>& thresholds = default_thresholds());

// Decodes per-sequence probabilities at `decode_threshold`, then evaluates.
struct SequenceResult {
  std::string seq;
  Tensor probs;                      // [T, K]
  std::vector<Segment> ground_truth;  // window units
};
EvalReport evaluate_sequences(const std::vector<SequenceResult>& results,
                              const std::vector<std::string>& class_names,
                              const std::vector<double>& thresholds = default_thresholds(),
                              double decode_threshold = 0.5);

// One JSON object per line: {"seq", "class", "start", "end", "conf"}.
void write_segments(const std::filesystem::path& path, const std::vector<Segment>& segments);
std::vector<Segment> read_segments(const std::filesystem::path& path);

}  // namespace tad::eval
