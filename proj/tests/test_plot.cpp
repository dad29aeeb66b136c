#include <regex>

#include "doctest.h"
#include "tad/plot.hpp"

using namespace tad;

namespace {

struct Bar {
  double x, width;
  std::string cls;
};

std::vector<Bar> bars(const std::string& svg) {
  static const std::regex rect(R"re(<rect class="bar" data-class="([^"]*)"[^>]*? x="([0-9.]+)"[^>]*? width="([0-9.]+)")re");
  std::vector<Bar> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), rect); it != std::sregex_iterator(); ++it) {
    out.push_back({std::stod((*it)[2]), std::stod((*it)[3]), (*it)[1]});
  }
  return out;
}

}  // namespace

TEST_CASE("timeline: bar extents are proportional to segment lengths") {
  const std::vector<eval::Segment> gt{{0, 2, 5, 1.0, "s"}, {1, 0, 10, 1.0, "s"}};
  const std::vector<eval::Segment> det{{0, 2, 4, 0.8, "s"}};
  const plot::TimelineOptions opt;
  const std::string svg = plot::timeline_svg(gt, det, 10, {"walk", "wave"}, opt);
  const auto b = bars(svg);
  REQUIRE(b.size() == 3);
  const double scale = opt.width / 10.0;
  CHECK(b[0].x == doctest::Approx(opt.left + 2 * scale).epsilon(1e-3));
  CHECK(b[0].width == doctest::Approx(3 * scale).epsilon(1e-3));
  CHECK(b[1].width == doctest::Approx(10 * scale).epsilon(1e-3));
  CHECK(b[2].width == doctest::Approx(2 * scale).epsilon(1e-3));
  CHECK(b[2].width / b[0].width == doctest::Approx(2.0 / 3.0).epsilon(1e-3));
  CHECK(svg.find("Pred") != std::string::npos);
  CHECK((svg.starts_with("<svg") || svg.starts_with("<?xml")));
}

TEST_CASE("timeline: empty detections draw only the ground-truth track") {
  const std::string svg = plot::timeline_svg({{0, 0, 3, 1.0, "s"}}, {}, 6, {"a&b"});
  CHECK(bars(svg).size() == 1);
  CHECK(svg.find("Pred") == std::string::npos);
  CHECK(svg.find("a&amp;b") != std::string::npos);
  CHECK(plot::class_color(0) == plot::class_color(10));
  CHECK(plot::class_color(0) != plot::class_color(1));
}
