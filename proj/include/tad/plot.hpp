#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tad/evaluation.hpp"

namespace tad::plot {

struct TimelineOptions {
  double width = 960.0;        // drawable time-axis width in pixels
  double lane_height = 14.0;   // one lane per class inside a track
  double left = 80.0;          // room for track labels
  double top = 30.0;
  double track_gap = 16.0;
};

// Fixed palette indexed by class, cycling after its end.
const std::string& class_color(std::size_t cls);

// GT track above a prediction track; bars span [start, end) of `length`
// windows. Detections may be empty.
std::string timeline_svg(const std::vector<eval::Segment>& ground_truth,
                         const std::vector<eval::Segment>& detections, std::size_t length,
                         const std::vector<std::string>& class_names,
                         const TimelineOptions& options = {});

}  // namespace tad::plot
