#include "tad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tad::eval {

std::vector<Segment> extract_segments(const Tensor& probs, double threshold) {
  if (probs.rank() != 2) throw ShapeError("extract_segments: probabilities must be [T, K]");
  const std::size_t t = probs.dim(0), k = probs.dim(1);
  std::vector<Segment> out;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t s = 0;
    while (s < t) {
      if (probs.at(s, c) < threshold) {
        ++s;
        continue;
      }
      std::size_t e = s;
      double sum = 0.0;
      while (e < t && probs.at(e, c) >= threshold) sum += probs.at(e++, c);
      out.push_back({c, s, e, sum / static_cast<double>(e - s), {}});
      s = e;
    }
  }
  return out;
}

double interval_iou(const Segment& a, const Segment& b) {
  if (a.start >= a.end || b.start >= b.end) throw std::invalid_argument("interval_iou: empty interval");
  const std::size_t lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  if (hi <= lo) return 0.0;
  const double inter = static_cast<double>(hi - lo);
  const double uni = static_cast<double>((a.end - a.start) + (b.end - b.start)) - inter;
  return inter / uni;
}

namespace {

struct MatchResult {
  std::vector<char> tp;  // per ranked detection
  std::size_t gt_count = 0;
};

MatchResult match(const std::vector<Segment>& detections, const std::vector<Segment>& gt,
                  std::size_t cls, double iou_threshold) {
  std::vector<const Segment*> dets, gts;
  for (const auto& d : detections) {
    if (d.cls == cls) dets.push_back(&d);
  }
  for (const auto& g : gt) {
    if (g.cls == cls) gts.push_back(&g);
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Segment* a, const Segment* b) { return a->confidence > b->confidence; });
  std::vector<char> used(gts.size(), 0);
  MatchResult r;
  r.gt_count = gts.size();
  for (const Segment* d : dets) {
    double best = -1.0;
    std::size_t best_i = gts.size();
    for (std::size_t i = 0; i < gts.size(); ++i) {
      if (used[i] || gts[i]->seq != d->seq) continue;
      const double iou = interval_iou(*d, *gts[i]);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        best_i = i;
      }
    }
    if (best_i < gts.size()) used[best_i] = 1;
    r.tp.push_back(best_i < gts.size() ? 1 : 0);
  }
  return r;
}

double average_precision(const MatchResult& m) {
  if (m.gt_count == 0 || m.tp.empty()) return 0.0;
  const std::size_t n = m.tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += static_cast<std::size_t>(m.tp[i]);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(m.gt_count);
  }
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

}  // namespace

double event_average_precision(const std::vector<Segment>& detections,
                               const std::vector<Segment>& ground_truth, std::size_t cls,
                               double iou_threshold) {
  return average_precision(match(detections, ground_truth, cls, iou_threshold));
}

EvalReport evaluate(const std::vector<Segment>& detections, const std::vector<Segment>& ground_truth,
                    const std::vector<std::string>& class_names,
                    const std::vector<double>& thresholds) {
  if (ground_truth.empty()) throw std::invalid_argument("evaluate: empty ground truth");
  if (thresholds.empty()) throw std::invalid_argument("evaluate: no IoU thresholds");
  for (const auto& s : detections) {
    if (s.start >= s.end || !std::isfinite(s.confidence)) throw std::invalid_argument("evaluate: malformed detection");
    if (s.cls >= class_names.size()) throw std::out_of_range("evaluate: detection class out of range");
  }
  for (const auto& s : ground_truth) {
    if (s.cls >= class_names.size()) throw std::out_of_range("evaluate: ground-truth class out of range");
  }
  EvalReport r;
  r.thresholds = thresholds;
  r.class_names = class_names;
  for (double th : thresholds) {
    std::vector<double> aps(class_names.size(), -1.0);
    std::vector<ClassCounts> counts(class_names.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const MatchResult m = match(detections, ground_truth, c, th);
      const std::size_t tp = static_cast<std::size_t>(std::count(m.tp.begin(), m.tp.end(), 1));
      counts[c] = {tp, m.tp.size() - tp, m.gt_count - tp};
      if (m.gt_count == 0) continue;
      aps[c] = average_precision(m);
      sum += aps[c];
      ++n;
    }
    r.ap.push_back(std::move(aps));
    r.counts.push_back(std::move(counts));
    r.map.push_back(sum / static_cast<double>(n));
  }
  return r;
}

EvalReport evaluate_sequences(const std::vector<SequenceResult>& results,
                              const std::vector<std::string>& class_names,
                              const std::vector<double>& thresholds, double decode_threshold) {
  if (results.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::vector<Segment> dets, gts;
  for (const auto& r : results) {
    if (r.probs.rank() != 2 || r.probs.dim(1) != class_names.size()) {
      throw ShapeError("evaluate: probabilities do not match the class vocabulary");
    }
    for (auto s : extract_segments(r.probs, decode_threshold)) {
      s.seq = r.seq;
      dets.push_back(std::move(s));
    }
    for (auto g : r.ground_truth) {
      g.seq = r.seq;
      gts.push_back(std::move(g));
    }
  }
  return evaluate(dets, gts, class_names, thresholds);
}

io::json EvalReport::to_json() const {
  io::json doc;
  doc["thresholds"] = thresholds;
  doc["classes"] = class_names;
  doc["map"] = map;
  doc["per_class"] = io::json::array();
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      const auto& k = counts[i][c];
      doc["per_class"].push_back({{"threshold", thresholds[i]},
                                  {"class", class_names[c]},
                                  {"ap", ap[i][c] < 0 ? io::json(nullptr) : io::json(ap[i][c])},
                                  {"tp", k.tp},
                                  {"fp", k.fp},
                                  {"missed", k.missed}});
    }
  }
  return doc;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "row";
  for (double th : thresholds) os << ",iou_" << static_cast<int>(std::lround(th * 100));
  os << '\n';
  os << "mAP";
  for (double m : map) os << ',' << m;
  os << '\n';
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    os << class_names[c];
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      os << ',';
      if (ap[i][c] >= 0) os << ap[i][c];
    }
    os << '\n';
  }
  return os.str();
}

void write_segments(const std::filesystem::path& path, const std::vector<Segment>& segments) {
  std::ostringstream os;
  for (const auto& s : segments) {
    os << io::json{{"seq", s.seq}, {"class", s.cls}, {"start", s.start}, {"end", s.end},
                   {"conf", s.confidence}}
              .dump()
       << '\n';
  }
  io::write_text(path, os.str());
}

std::vector<Segment> read_segments(const std::filesystem::path& path) {
  std::istringstream is(io::read_text(path));
  std::vector<Segment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = io::json::parse(line);
      Segment s;
      s.seq = j.value("seq", "");
      s.cls = j.at("class").get<std::size_t>();
      s.start = j.at("start").get<std::size_t>();
      s.end = j.at("end").get<std::size_t>();
      s.confidence = j.value("conf", 1.0);
      if (s.start >= s.end) throw std::invalid_argument("start >= end");
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed segment: " +
                               e.what());
    }
  }
  return out;
}

}  // namespace tad::eval
