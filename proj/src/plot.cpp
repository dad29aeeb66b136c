#include "tad/plot.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

namespace tad::plot {

namespace {

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

const std::string& class_color(std::size_t cls) {
  static const std::array<std::string, 10> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                      "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                      "#bcbd22", "#17becf"};
  return palette[cls % palette.size()];
}

std::string timeline_svg(const std::vector<eval::Segment>& ground_truth,
                         const std::vector<eval::Segment>& detections, std::size_t length,
                         const std::vector<std::string>& class_names, const TimelineOptions& o) {
  if (length == 0) throw std::invalid_argument("timeline: empty time axis");
  if (class_names.empty()) throw std::invalid_argument("timeline: no classes");
  const std::size_t k = class_names.size();
  const double scale = o.width / static_cast<double>(length);
  const double track_h = static_cast<double>(k) * o.lane_height;
  const double legend_y = o.top + 2.0 * track_h + o.track_gap + 30.0;
  const double total_w = o.left + o.width + 20.0;
  const double total_h = legend_y + 20.0;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\"" << total_h
      << "\" viewBox=\"0 0 " << total_w << ' ' << total_h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  auto track = [&](const char* name, const std::vector<eval::Segment>& segs, double y0) {
    svg << "  <g class=\"track\" data-name=\"" << name << "\">\n"
        << "    <text x=\"4\" y=\"" << y0 + track_h / 2.0 + 4.0 << "\">" << name << "</text>\n"
        << "    <rect x=\"" << o.left << "\" y=\"" << y0 << "\" width=\"" << o.width << "\" height=\""
        << track_h << "\" fill=\"#f4f4f4\" stroke=\"#cccccc\"/>\n";
    for (const auto& s : segs) {
      if (s.cls >= k) throw std::out_of_range("timeline: segment class out of range");
      if (s.start >= s.end || s.end > length) throw std::invalid_argument("timeline: segment outside axis");
      svg << "    <rect class=\"bar\" data-class=\"" << s.cls << "\" x=\""
          << o.left + static_cast<double>(s.start) * scale << "\" y=\""
          << y0 + static_cast<double>(s.cls) * o.lane_height << "\" width=\""
          << static_cast<double>(s.end - s.start) * scale << "\" height=\"" << o.lane_height
          << "\" fill=\"" << class_color(s.cls) << "\"/>\n";
    }
    svg << "  </g>\n";
  };
  track("GT", ground_truth, o.top);
  if (!detections.empty()) track("Pred", detections, o.top + track_h + o.track_gap);

  const double axis_y = o.top + 2.0 * track_h + o.track_gap + 12.0;
  svg << "  <line x1=\"" << o.left << "\" y1=\"" << axis_y << "\" x2=\"" << o.left + o.width
      << "\" y2=\"" << axis_y << "\" stroke=\"#333333\"/>\n";
  const std::size_t tick = std::max<std::size_t>(1, length / 10);
  for (std::size_t t = 0; t <= length; t += tick) {
    const double x = o.left + static_cast<double>(t) * scale;
    svg << "  <text x=\"" << x << "\" y=\"" << axis_y + 12.0 << "\" text-anchor=\"middle\">" << t
        << "</text>\n";
  }
  double lx = o.left;
  for (std::size_t c = 0; c < k; ++c) {
    svg << "  <rect x=\"" << lx << "\" y=\"" << legend_y - 9.0 << "\" width=\"10\" height=\"10\" fill=\""
        << class_color(c) << "\"/>\n"
        << "  <text x=\"" << lx + 14.0 << "\" y=\"" << legend_y << "\">" << escape(class_names[c])
        << "</text>\n";
    lx += 24.0 + 7.0 * static_cast<double>(class_names[c].size());
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tad::plot
