#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "tad/evaluation.hpp"

using namespace tad;
using namespace tad::eval;
using testing::Gen;

namespace {

Segment seg(std::size_t cls, std::size_t a, std::size_t b, double conf = 1.0, std::string seq = "s") {
  return {cls, a, b, conf, std::move(seq)};
}

// Precision/recall table from the ranked match list, then the precision
// envelope read off at each true positive.
double oracle_ap(const std::vector<Segment>& dets, const std::vector<Segment>& gts, std::size_t cls, double th) {
  std::vector<Segment> d, g;
  for (const auto& s : dets) if (s.cls == cls) d.push_back(s);
  for (const auto& s : gts) if (s.cls == cls) g.push_back(s);
  if (g.empty() || d.empty()) return 0.0;
  std::stable_sort(d.begin(), d.end(), [](const Segment& a, const Segment& b) { return a.confidence > b.confidence; });
  std::vector<bool> used(g.size(), false), hit;
  for (const auto& det : d) {
    double best = -1.0;
    std::size_t pick = g.size();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (used[i] || g[i].seq != det.seq) continue;
      const double lo = std::max(det.start, g[i].start), hi = std::min(det.end, g[i].end);
      const double inter = hi > lo ? hi - lo : 0.0;
      const double uni = static_cast<double>(det.end - det.start + g[i].end - g[i].start) - inter;
      const double iou = inter / uni;
      if (iou >= th && iou > best) best = iou, pick = i;
    }
    if (pick < g.size()) used[pick] = true;
    hit.push_back(pick < g.size());
  }
  std::vector<double> precision;
  double tp = 0.0;
  for (std::size_t k = 0; k < hit.size(); ++k) {
    tp += hit[k] ? 1.0 : 0.0;
    precision.push_back(tp / static_cast<double>(k + 1));
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < hit.size(); ++k) {
    if (!hit[k]) continue;
    ap += *std::max_element(precision.begin() + static_cast<std::ptrdiff_t>(k), precision.end());
  }
  return ap / static_cast<double>(g.size());
}

std::vector<Segment> random_segments(Gen& gen, std::size_t max_count, std::size_t classes, bool with_conf) {
  std::vector<Segment> out;
  for (std::size_t i = gen.index(0, max_count); i > 0; --i) {
    const std::size_t a = gen.index(0, 25);
    out.push_back(seg(gen.index(0, classes - 1), a, a + gen.index(1, 10), with_conf ? gen.uniform(0.0, 1.0) : 1.0,
                      gen.coin(0.8) ? "a" : "b"));
  }
  return out;
}

}  // namespace

TEST_CASE("decoding: worked examples") {
  const Tensor low(Shape{4, 2}, 0.2);
  CHECK(extract_segments(low).empty());

  const Tensor p(Shape{4, 1}, std::vector<double>{0.9, 0.9, 0.1, 0.8});
  const auto s = extract_segments(p);
  REQUIRE(s.size() == 2);
  CHECK(s[0].start == 0);
  CHECK(s[0].end == 2);
  CHECK(s[0].confidence == doctest::Approx(0.9));
  CHECK(s[1].start == 3);
  CHECK(s[1].end == 4);
  CHECK(s[1].confidence == doctest::Approx(0.8));

  const Tensor both(Shape{1, 2}, std::vector<double>{0.7, 0.6});
  const auto m = extract_segments(both);
  REQUIRE(m.size() == 2);
  CHECK(m[0].cls != m[1].cls);
  CHECK_THROWS_AS(extract_segments(Tensor(Shape{3})), ShapeError);
}

TEST_CASE("interval IoU examples") {
  CHECK(interval_iou(seg(0, 2, 7), seg(0, 2, 7)) == 1.0);
  CHECK(interval_iou(seg(0, 0, 5), seg(0, 5, 9)) == 0.0);
  CHECK(interval_iou(seg(0, 0, 10), seg(0, 5, 15)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS(interval_iou(seg(0, 3, 3), seg(0, 0, 5)));
}

TEST_CASE("average precision examples") {
  const std::vector<Segment> gt{seg(0, 0, 10)};
  CHECK(event_average_precision(gt, gt, 0, 0.5) == 1.0);
  CHECK(event_average_precision({}, gt, 0, 0.5) == 0.0);
  CHECK(event_average_precision({seg(0, 0, 10, 0.9), seg(0, 20, 30, 0.8)}, gt, 0, 0.5) == 1.0);
  // detections in another sequence never match
  CHECK(event_average_precision({seg(0, 0, 10, 0.9, "other")}, gt, 0, 0.5) == 0.0);
}

TEST_CASE("two-class toy against a hand-computed PR table") {
  // class 0 ranks: TP (P=1, R=.5), FP (P=.5), TP (P=2/3, R=1) -> AP = (1 + 2/3) / 2
  // class 1: single detection with IoU exactly 0.5 -> AP = 1
  const std::vector<Segment> gts{seg(0, 0, 10), seg(0, 20, 30), seg(1, 5, 15)};
  const std::vector<Segment> dets{seg(0, 0, 10, 0.9), seg(0, 40, 50, 0.8), seg(0, 20, 30, 0.7), seg(1, 5, 10, 0.6)};
  CHECK(event_average_precision(dets, gts, 0, 0.5) == doctest::Approx(0.8333333333333333).epsilon(1e-15));
  CHECK(event_average_precision(dets, gts, 1, 0.5) == 1.0);
  const EvalReport r = evaluate(dets, gts, {"a", "b"});
  CHECK(r.map[2] == doctest::Approx(0.9166666666666666).epsilon(1e-15));
  CHECK(r.counts[2][0].tp == 2);
  CHECK(r.counts[2][0].fp == 1);
  CHECK(r.counts[2][0].missed == 0);
  // at IoU 0.1 nothing changes; IoU 0.5 is the boundary for class 1
  CHECK(r.map[0] == doctest::Approx(0.9166666666666666).epsilon(1e-15));
}

TEST_CASE("average precision matches the rank-table oracle") {
  Gen gen(42);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto gts = random_segments(gen, 5, 2, false);
    const auto dets = random_segments(gen, 8, 2, true);
    for (std::size_t c = 0; c < 2; ++c) {
      for (double th : default_thresholds()) {
        worst = std::max(worst, std::abs(event_average_precision(dets, gts, c, th) - oracle_ap(dets, gts, c, th)));
      }
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("report properties: monotone in IoU, rank invariant, bounded") {
  Gen gen(43);
  for (int trial = 0; trial < 100; ++trial) {
    auto gts = random_segments(gen, 6, 3, false);
    if (gts.empty()) gts.push_back(seg(0, 0, 4));
    auto dets = random_segments(gen, 10, 3, true);
    const EvalReport r = evaluate(dets, gts, {"a", "b", "c"});
    CHECK(r.map[0] >= r.map[1]);
    CHECK(r.map[1] >= r.map[2]);
    for (const auto& row : r.ap) {
      for (double ap : row) CHECK((ap == -1.0 || (ap >= 0.0 && ap <= 1.0)));
    }
    const double k = gen.uniform(0.01, 0.99);
    for (auto& d : dets) d.confidence *= k;
    CHECK(evaluate(dets, gts, {"a", "b", "c"}).map == r.map);
  }
}

TEST_CASE("classes without ground truth are excluded from the mean") {
  const EvalReport r = evaluate({seg(0, 0, 4, 0.9), seg(1, 0, 4, 0.9)}, {seg(0, 0, 4)}, {"a", "b", "c"});
  CHECK(r.ap[2][1] == -1.0);
  CHECK(r.ap[2][2] == -1.0);
  CHECK(r.map[2] == 1.0);
  CHECK_THROWS(evaluate({}, {}, {"a"}));
  CHECK_THROWS_AS(evaluate({seg(5, 0, 1)}, {seg(0, 0, 1)}, {"a"}), std::out_of_range);
}

TEST_CASE("decoding ground-truth indicators reproduces the segments") {
  Gen gen(44);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = gen.index(1, 30), k = gen.index(1, 4);
    Tensor ind(Shape{t, k});
    std::vector<Segment> truth;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t pos = gen.index(0, 3);
      while (pos < t) {
        const std::size_t end = std::min(t, pos + gen.index(1, 6));
        truth.push_back(seg(c, pos, end, 1.0, ""));
        for (std::size_t i = pos; i < end; ++i) ind.at(i, c) = 1.0;
        pos = end + gen.index(1, 5);
      }
    }
    CHECK(extract_segments(ind) == truth);
  }
}

TEST_CASE("perfect detectors score one at every threshold") {
  const std::vector<Segment> gt{seg(0, 0, 3, 1.0, "x"), seg(1, 2, 6, 1.0, "x")};
  Tensor probs(Shape{8, 2});
  for (const auto& g : gt) {
    for (std::size_t i = g.start; i < g.end; ++i) probs.at(i, g.cls) = 1.0;
  }
  const EvalReport r = evaluate_sequences({{"x", probs, gt}}, {"a", "b"});
  CHECK(r.map == std::vector<double>{1.0, 1.0, 1.0});
  CHECK_THROWS(evaluate_sequences({}, {"a", "b"}));
  CHECK_THROWS(evaluate_sequences({{"x", Tensor(Shape{8, 3}), gt}}, {"a", "b"}));
}

TEST_CASE("segment files and report formats") {
  const auto dir = testing::temp_dir("eval");
  const std::vector<Segment> segs{seg(0, 1, 4, 0.25, "q"), seg(2, 0, 9, 0.75, "r")};
  write_segments(dir / "d.jsonl", segs);
  CHECK(read_segments(dir / "d.jsonl") == segs);
  io::write_text(dir / "bad.jsonl", "{\"seq\":\"q\",\"class\":0,\"start\":1,\"end\":4,\"conf\":1}\n{oops\n");
  try {
    read_segments(dir / "bad.jsonl");
    FAIL("malformed line accepted");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
  }

  const EvalReport r = evaluate({seg(0, 0, 4, 0.9)}, {seg(0, 0, 4), seg(1, 0, 2)}, {"walk", "wave"});
  const std::string csv = r.to_csv();
  std::istringstream lines(csv);
  std::string header, map_row, first;
  std::getline(lines, header);
  std::getline(lines, map_row);
  std::getline(lines, first);
  CHECK(header == "row,iou_10,iou_30,iou_50");
  CHECK(map_row == "mAP,0.5,0.5,0.5");
  CHECK(first == "walk,1,1,1");
  const io::json doc = r.to_json();
  CHECK(doc.at("map").size() == 3);
  CHECK(doc.at("per_class").size() == 6);
}
