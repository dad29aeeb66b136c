// Command-line driver: dataset generation, two-stage training, feature
// extraction, evaluation, inference, timeline plots and the scan benchmark.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tad/dataset.hpp"
#include "tad/evaluation.hpp"
#include "tad/hydraview.hpp"
#include "tad/io.hpp"
#include "tad/log.hpp"
#include "tad/pipeline.hpp"
#include "tad/plot.hpp"
#include "tad/ssm.hpp"
#include "tad/swgcn.hpp"

namespace fs = std::filesystem;
using tad::io::json;

namespace {

// Every TrainConfig key is exposed as `--key value`; values are parsed by
// apply_overrides so the flag and config-file paths share validation.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd, const std::vector<std::string>& skip = {}) {
    cmd->add_option("--config", config_file, "JSON config file (flat keys); flags override it")
        ->check(CLI::ExistingFile);
    for (const auto& [key, def] : tad::pipeline::default_config().items()) {
      if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
      std::string shown = def.is_array() ? "" : def.dump();
      if (def.is_array()) {
        for (std::size_t i = 0; i < def.size(); ++i) shown += (i ? "," : "") + def[i].dump();
      }
      cmd->add_option_function<std::string>(
          "--" + key, [this, key = key](const std::string& v) { values[key] = v; },
          "config key (default " + shown + ")");
    }
  }

  tad::pipeline::TrainConfig resolve(std::map<std::string, std::string> forced = {}) const {
    json base = json::object();
    if (!config_file.empty()) base = json::parse(tad::io::read_text(config_file));
    auto merged = values;
    for (auto& [k, v] : forced) merged[k] = v;
    const json flat = tad::pipeline::apply_overrides(base, merged);
    auto cfg = tad::pipeline::TrainConfig::from_json(flat);
    std::cerr << "resolved config: " << cfg.to_json().dump() << '\n';
    return cfg;
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty list '" + text + "'");
  return out;
}

std::vector<tad::data::SkeletonSequence> split_of(const fs::path& manifest_path, const std::string& split) {
  const auto m = tad::data::read_manifest(manifest_path);
  if (split == "train") return tad::data::load_split(manifest_path, m.train);
  if (split == "val") return tad::data::load_split(manifest_path, m.val);
  if (split == "test") return tad::data::load_split(manifest_path, m.test);
  if (split == "all") {
    auto all = m.train;
    all.insert(all.end(), m.val.begin(), m.val.end());
    all.insert(all.end(), m.test.begin(), m.test.end());
    return tad::data::load_split(manifest_path, all);
  }
  throw std::invalid_argument("unknown split '" + split + "'");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view skeleton temporal action detection"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a seeded synthetic skeleton dataset");
  tad::data::GeneratorConfig gcfg;
  tad::data::SplitFractions split;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gcfg.seed, "Generator seed")->capture_default_str();
  gen->add_option("--classes", gcfg.classes, "Action classes (motion primitives)")->capture_default_str();
  gen->add_option("--sequences", gcfg.sequences, "Number of sequences")->capture_default_str();
  gen->add_option("--frames", gcfg.frames, "Frames per sequence")->capture_default_str();
  gen->add_option("--joints", gcfg.joints, "Joints per skeleton (5..15)")->capture_default_str();
  gen->add_option("--fps", gcfg.fps, "Frame rate")->capture_default_str();
  gen->add_option("--noise", gcfg.joint_noise, "Joint position noise (std)")->capture_default_str();
  gen->add_option("--val-fraction", split.val, "Validation fraction")->capture_default_str();
  gen->add_option("--test-fraction", split.test, "Test fraction")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train stage 1 (window encoder) or stage 2 (HydraView)");
  ConfigFlags train_flags;
  std::string train_data, train_out, stage1_ckpt;
  train->add_option("--data", train_data, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_option("--stage1-ckpt", stage1_ckpt, "Frozen stage-1 checkpoint (stage 2 only)");
  train_flags.attach(train);

  // extract-features
  auto* extract = app.add_subcommand("extract-features", "Cache feature grids from a frozen encoder");
  ConfigFlags extract_flags;
  std::string ex_data, ex_out, ex_ckpt, ex_split = "all";
  extract->add_option("--data", ex_data, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  extract->add_option("--stage1-ckpt", ex_ckpt, "Stage-1 checkpoint")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", ex_out, "Feature directory")->required();
  extract->add_option("--split", ex_split, "train|val|test|all")->capture_default_str();
  extract_flags.attach(extract);

  // eval
  auto* evalc = app.add_subcommand("eval", "Infer on a split and report event mAP");
  ConfigFlags eval_flags;
  std::string ev_data, ev_s1, ev_s2, ev_out, ev_split = "test", ev_thresholds = "0.1,0.3,0.5";
  evalc->add_option("--data", ev_data, "Dataset manifest.json")->required()->check(CLI::ExistingFile);
  evalc->add_option("--stage1-ckpt", ev_s1, "Stage-1 checkpoint")->required()->check(CLI::ExistingFile);
  evalc->add_option("--stage2-ckpt", ev_s2, "Stage-2 checkpoint")->required()->check(CLI::ExistingFile);
  evalc->add_option("--out", ev_out, "Report directory")->required();
  evalc->add_option("--split", ev_split, "train|val|test|all")->capture_default_str();
  evalc->add_option("--thresholds", ev_thresholds, "Comma-separated IoU thresholds")->capture_default_str();
  eval_flags.attach(evalc);

  // infer
  auto* inf = app.add_subcommand("infer", "Per-window class probabilities for one .skel sequence");
  ConfigFlags infer_flags;
  std::string in_seq, in_s1, in_s2, in_out;
  double in_threshold = 0.5;
  inf->add_option("--input", in_seq, "Sequence .skel file")->required()->check(CLI::ExistingFile);
  inf->add_option("--stage1-ckpt", in_s1, "Stage-1 checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--stage2-ckpt", in_s2, "Stage-2 checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--out", in_out, "Write detections (JSON lines) here; probabilities go to stdout");
  inf->add_option("--threshold", in_threshold, "Decoding threshold")->capture_default_str();
  infer_flags.attach(inf);

  // plot
  auto* plt = app.add_subcommand("plot", "Render GT and predicted segments as an SVG timeline");
  std::string pl_det, pl_gt, pl_out, pl_seq, pl_classes;
  std::size_t pl_length = 0;
  plt->add_option("--gt", pl_gt, "Ground-truth segments (JSON lines)")->required()->check(CLI::ExistingFile);
  plt->add_option("--detections", pl_det, "Detected segments (JSON lines)")->check(CLI::ExistingFile);
  plt->add_option("--out", pl_out, "Output .svg")->required();
  plt->add_option("--seq", pl_seq, "Sequence id to plot (default: first in GT)");
  plt->add_option("--length", pl_length, "Time-axis length in windows (default: last segment end)");
  plt->add_option("--class-names", pl_classes, "Comma-separated class names");

  // bench-scan
  auto* bench = app.add_subcommand("bench-scan", "Time the selective scan at several lengths (CSV)");
  std::string bn_lengths = "2048,4096";
  std::size_t bn_channels = 64, bn_state = 16, bn_trials = 10;
  std::uint64_t bn_seed = 1;
  bench->add_option("--lengths", bn_lengths, "Comma-separated sequence lengths")->capture_default_str();
  bench->add_option("--channels", bn_channels, "Channels C")->capture_default_str();
  bench->add_option("--state", bn_state, "State dimension N")->capture_default_str();
  bench->add_option("--trials", bn_trials, "Timed trials per length")->capture_default_str();
  bench->add_option("--seed", bn_seed, "Input seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return 2;
  }
  tad::log::set_level(quiet ? tad::log::Level::kQuiet : verbose ? tad::log::Level::kInfo : tad::log::Level::kWarn);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      const auto seqs = tad::data::generate_synthetic(gcfg);
      const auto m = tad::data::write_dataset(gen_out, seqs, split, gcfg.seed);
      std::cout << json{{"sequences", seqs.size()},
                        {"train", m.train.size()},
                        {"val", m.val.size()},
                        {"test", m.test.size()},
                        {"manifest", (fs::path(gen_out) / "manifest.json").string()}}
                       .dump()
                << '\n';
    } else if (*train) {
      auto cfg = train_flags.resolve();
      if (cfg.stage == 1) {
        const auto r = tad::pipeline::train_stage1(cfg, train_data, train_out);
        std::cout << json{{"stage", 1},
                          {"best_epoch", r.best_epoch},
                          {"best_val_accuracy", r.best_val_accuracy},
                          {"checkpoint", (fs::path(train_out) / "stage1.ckpt").string()}}
                         .dump()
                  << '\n';
      } else {
        if (stage1_ckpt.empty()) throw std::invalid_argument("stage 2 requires --stage1-ckpt (missing stage-1 checkpoint)");
        const auto r = tad::pipeline::train_stage2(cfg, train_data, stage1_ckpt, train_out);
        std::cout << json{{"stage", 2},
                          {"best_epoch", r.best_epoch},
                          {"best_val_map50", r.best_val_map},
                          {"encoder_hash", r.encoder_hash_after},
                          {"checkpoint", (fs::path(train_out) / "stage2.ckpt").string()}}
                         .dump()
                  << '\n';
      }
    } else if (*extract) {
      const auto encoder = tad::swgcn::Swgcn::load(ex_ckpt);
      auto cfg = extract_flags.resolve({{"window", std::to_string(encoder.config().frames)}});
      const auto cams = tad::pipeline::make_rig(cfg);
      std::size_t n = 0;
      for (const auto& s : split_of(ex_data, ex_split)) {
        tad::pipeline::sequence_features(encoder, s, cams, cfg, ex_out);
        ++n;
      }
      std::cout << json{{"sequences", n}, {"views", cams.size()}, {"out", ex_out}}.dump() << '\n';
    } else if (*evalc) {
      const auto encoder = tad::swgcn::Swgcn::load(ev_s1);
      const auto model = tad::hydra::HydraView::load(ev_s2);
      auto cfg = eval_flags.resolve({{"window", std::to_string(encoder.config().frames)}});
      const auto seqs = split_of(ev_data, ev_split);
      std::vector<tad::eval::Segment> dets;
      const auto report =
          tad::pipeline::evaluate_split(encoder, model, seqs, cfg.views, cfg, parse_list(ev_thresholds), &dets);
      std::vector<tad::eval::Segment> gts;
      for (const auto& s : seqs) {
        auto g = tad::pipeline::window_ground_truth(s, cfg.window, cfg.stride);
        gts.insert(gts.end(), g.begin(), g.end());
      }
      fs::create_directories(ev_out);
      tad::io::write_text(fs::path(ev_out) / "report.json", report.to_json().dump(2));
      tad::io::write_text(fs::path(ev_out) / "report.csv", report.to_csv());
      tad::eval::write_segments(fs::path(ev_out) / "detections.jsonl", dets);
      tad::eval::write_segments(fs::path(ev_out) / "gt.jsonl", gts);
      std::cout << json{{"views", cfg.views}, {"thresholds", report.thresholds}, {"map", report.map}}.dump()
                << '\n';
    } else if (*inf) {
      const auto encoder = tad::swgcn::Swgcn::load(in_s1);
      const auto model = tad::hydra::HydraView::load(in_s2);
      auto cfg = infer_flags.resolve({{"window", std::to_string(encoder.config().frames)}});
      const auto seq = tad::data::read_sequence(in_seq);
      const tad::Tensor probs = tad::pipeline::infer(encoder, model, seq, cfg.views, cfg);
      json rows = json::array();
      for (std::size_t t = 0; t < probs.dim(0); ++t) {
        json row = json::array();
        for (std::size_t c = 0; c < probs.dim(1); ++c) row.push_back(probs.at(t, c));
        rows.push_back(std::move(row));
      }
      std::cout << json{{"seq", seq.id}, {"classes", seq.class_names}, {"probs", rows}}.dump() << '\n';
      if (!in_out.empty()) {
        auto segs = tad::eval::extract_segments(probs, in_threshold);
        for (auto& s : segs) s.seq = seq.id;
        tad::eval::write_segments(in_out, segs);
      }
    } else if (*plt) {
      auto gts = tad::eval::read_segments(pl_gt);
      auto dets = pl_det.empty() ? std::vector<tad::eval::Segment>{} : tad::eval::read_segments(pl_det);
      if (pl_seq.empty() && !gts.empty()) pl_seq = gts.front().seq;
      auto keep = [&](std::vector<tad::eval::Segment>& v) {
        std::erase_if(v, [&](const tad::eval::Segment& s) { return s.seq != pl_seq; });
      };
      keep(gts);
      keep(dets);
      std::size_t k = 0, length = pl_length;
      for (const auto* v : {&gts, &dets}) {
        for (const auto& s : *v) {
          k = std::max(k, s.cls + 1);
          if (pl_length == 0) length = std::max(length, s.end);
        }
      }
      std::vector<std::string> names;
      if (!pl_classes.empty()) {
        std::stringstream ss(pl_classes);
        std::string item;
        while (std::getline(ss, item, ',')) names.push_back(item);
      }
      for (std::size_t c = names.size(); c < std::max<std::size_t>(k, 1); ++c) names.push_back("class " + std::to_string(c));
      tad::io::write_text(pl_out, tad::plot::timeline_svg(gts, dets, std::max<std::size_t>(length, 1), names));
      std::cout << json{{"seq", pl_seq}, {"gt", gts.size()}, {"detections", dets.size()}, {"out", pl_out}}.dump()
                << '\n';
    } else if (*bench) {
      std::mt19937_64 rng(bn_seed);
      tad::ParameterSet params;
      const std::size_t first = tad::ssm::add_scan_params(params, "bench", bn_channels, bn_state, rng);
      std::vector<tad::Var> bound;
      for (const auto& p : params.items()) bound.push_back(tad::Var::constant(p.value));
      const auto w = tad::ssm::bind_scan(bound, first);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::cout << "length,channels,state,trials,median_seconds\n";
      for (double lf : parse_list(bn_lengths)) {
        const auto len = static_cast<std::size_t>(lf);
        tad::Tensor u(tad::Shape{len, bn_channels});
        for (double& x : u.data()) x = normal(rng);
        const auto order = tad::ssm::linear_order(len);
        std::vector<double> times;
        for (std::size_t i = 0; i < bn_trials; ++i) {
          const auto t0 = std::chrono::steady_clock::now();
          const auto y = tad::ssm::selective_scan(tad::Var::constant(u), w, order);
          const auto t1 = std::chrono::steady_clock::now();
          if (y.value().size() != u.size()) throw std::logic_error("scan output size mismatch");
          times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::cout << len << ',' << bn_channels << ',' << bn_state << ',' << bn_trials << ',' << median(times)
                  << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"command", command}}.dump() << '\n';
    return 1;
  }
  return 0;
}
