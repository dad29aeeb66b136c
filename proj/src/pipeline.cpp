#include "tad/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tad/checkpoint.hpp"
#include "tad/log.hpp"
#include "tad/nn.hpp"
#include "tad/ops.hpp"
#include "tad/optim.hpp"

namespace tad::pipeline {

namespace fs = std::filesystem;

const io::json& default_config() {
  static const io::json doc = [] {
    const TrainConfig c;
    return c.to_json();
  }();
  return doc;
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
  if (batch == 0) throw std::invalid_argument("batch must be at least 1");
  if (views == 0) throw std::invalid_argument("views must be at least 1");
  if (window < 2) throw std::invalid_argument("window must be at least 2 frames");
  if (stride == 0) throw std::invalid_argument("stride must be at least 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (occlusion_margin < 0.0) throw std::invalid_argument("occlusion_margin must be non-negative");
  if (!(rig.spacing_deg > 0.0) || !(rig.radius > 0.0) || !(rig.focal > 0.0)) {
    throw std::invalid_argument("rig spacing, radius and focal must be positive");
  }
  swgcn.validate();
  hydra.validate();
}

io::json TrainConfig::to_json() const {
  return io::json{
      {"stage", stage},
      {"epochs", epochs},
      {"lr", lr},
      {"weight_decay", weight_decay},
      {"batch", batch},
      {"seed", seed},
      {"views", views},
      {"window", window},
      {"stride", stride},
      {"clip_norm", clip_norm},
      {"occlusion_margin", occlusion_margin},
      {"grouped_views", grouped_views},
      {"view_subsets", view_subsets},
      {"rig_spacing", rig.spacing_deg},
      {"rig_radius", rig.radius},
      {"rig_height", rig.height},
      {"rig_focal", rig.focal},
      {"rig_elevation", rig.elevation_deg},
      {"swgcn_dim", swgcn.dim},
      {"swgcn_blocks", swgcn.blocks},
      {"swgcn_kernel_t", swgcn.kernel_t},
      {"swgcn_groups", swgcn.groups},
      {"vm_kernel_v", hydra.block.kernel_v},
      {"vm_kernel_t", hydra.block.kernel_t},
      {"vm_stride_v", hydra.block.stride_v},
      {"vm_channels", hydra.block.out_channels},
      {"vm_state_dim", hydra.block.state_dim},
      {"vm_residual", hydra.block.residual},
      {"scales", hydra.scales},
      {"fuse_dim", hydra.fuse_dim},
      {"head_hidden", hydra.head_hidden},
      {"input_norm", hydra.input_norm},
  };
}

TrainConfig TrainConfig::from_json(const io::json& flat) {
  if (!flat.is_object()) throw std::invalid_argument("config must be a JSON object");
  const io::json& defaults = default_config();
  for (const auto& [key, value] : flat.items()) {
    if (!defaults.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  io::json d = defaults;
  d.update(flat);
  TrainConfig c;
  c.stage = d.at("stage").get<int>();
  c.epochs = d.at("epochs").get<std::size_t>();
  c.lr = d.at("lr").get<double>();
  c.weight_decay = d.at("weight_decay").get<double>();
  c.batch = d.at("batch").get<std::size_t>();
  c.seed = d.at("seed").get<std::uint64_t>();
  c.views = d.at("views").get<std::size_t>();
  c.window = d.at("window").get<std::size_t>();
  c.stride = d.at("stride").get<std::size_t>();
  c.clip_norm = d.at("clip_norm").get<double>();
  c.occlusion_margin = d.at("occlusion_margin").get<double>();
  c.grouped_views = d.at("grouped_views").get<bool>();
  c.view_subsets = d.at("view_subsets").get<bool>();
  c.rig.spacing_deg = d.at("rig_spacing").get<double>();
  c.rig.radius = d.at("rig_radius").get<double>();
  c.rig.height = d.at("rig_height").get<double>();
  c.rig.focal = d.at("rig_focal").get<double>();
  c.rig.elevation_deg = d.at("rig_elevation").get<double>();
  c.rig.views = c.views;
  c.swgcn.dim = d.at("swgcn_dim").get<std::size_t>();
  c.swgcn.blocks = d.at("swgcn_blocks").get<std::size_t>();
  c.swgcn.kernel_t = d.at("swgcn_kernel_t").get<std::size_t>();
  c.swgcn.groups = d.at("swgcn_groups").get<std::size_t>();
  c.swgcn.frames = c.window;
  c.hydra.block.kernel_v = d.at("vm_kernel_v").get<std::size_t>();
  c.hydra.block.kernel_t = d.at("vm_kernel_t").get<std::size_t>();
  c.hydra.block.stride_v = d.at("vm_stride_v").get<std::size_t>();
  c.hydra.block.out_channels = d.at("vm_channels").get<std::size_t>();
  c.hydra.block.state_dim = d.at("vm_state_dim").get<std::size_t>();
  c.hydra.block.residual = d.at("vm_residual").get<bool>();
  c.hydra.scales = d.at("scales").get<std::vector<std::size_t>>();
  c.hydra.fuse_dim = d.at("fuse_dim").get<std::size_t>();
  c.hydra.head_hidden = d.at("head_hidden").get<std::size_t>();
  c.hydra.input_norm = d.at("input_norm").get<bool>();
  c.hydra.in_channels = c.swgcn.dim;
  c.validate();
  return c;
}

namespace {

io::json parse_like(const io::json& like, const std::string& key, const std::string& text) {
  auto fail = [&]() -> io::json {
    throw std::invalid_argument("invalid value '" + text + "' for config key '" + key + "'");
  };
  try {
    if (like.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      return fail();
    }
    if (like.is_array()) {
      io::json arr = io::json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(item, &pos);
        if (pos != item.size()) return fail();
        arr.push_back(v);
      }
      return arr;
    }
    std::size_t pos = 0;
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') return fail();
      const unsigned long long v = std::stoull(text, &pos);
      if (pos != text.size()) return fail();
      return v;
    }
    if (like.is_number_integer()) {
      const long long v = std::stoll(text, &pos);
      if (pos != text.size()) return fail();
      return v;
    }
    if (like.is_number_float()) {
      const double v = std::stod(text, &pos);
      if (pos != text.size() || !std::isfinite(v)) return fail();
      return v;
    }
  } catch (const std::logic_error&) {
    return fail();
  }
  return text;
}

}  // namespace

io::json apply_overrides(io::json base, const std::map<std::string, std::string>& overrides) {
  const io::json& defaults = default_config();
  for (const auto& [key, text] : overrides) {
    if (!defaults.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
    base[key] = parse_like(defaults.at(key), key, text);
  }
  return base;
}

std::vector<geom::VirtualCamera> make_rig(const TrainConfig& config) {
  geom::RigConfig rig = config.rig;
  rig.views = config.views;
  return geom::make_virtual_cameras(rig);
}

std::vector<geom::SkeletonWindow3D> sequence_windows(const data::SkeletonSequence& seq,
                                                     std::size_t window, std::size_t stride) {
  data::WindowBatch batch = data::split_windows(seq, window, stride);
  std::vector<geom::SkeletonWindow3D> out;
  out.reserve(batch.windows.size());
  for (auto& w : batch.windows) out.push_back(geom::center_on_root(w));
  return out;
}

std::vector<LabeledWindow> prepare_windows(const std::vector<data::SkeletonSequence>& sequences,
                                           const TrainConfig& config,
                                           const std::vector<geom::VirtualCamera>& cameras) {
  std::vector<LabeledWindow> out;
  for (const auto& seq : sequences) {
    const data::WindowBatch batch = data::split_windows(seq, config.window, config.stride);
    for (std::size_t i = 0; i < batch.windows.size(); ++i) {
      LabeledWindow lw;
      lw.seq = seq.id;
      lw.index = i;
      lw.label = batch.labels[i];
      const auto views = geom::render_views(geom::center_on_root(batch.windows[i]), cameras,
                                            seq.topology.torso, config.occlusion_margin);
      for (const auto& pw : views) lw.views.push_back(swgcn::window_input(pw));
      out.push_back(std::move(lw));
    }
  }
  return out;
}

namespace {

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

// Accuracy over the given (window, view) pairs, evaluated in batches.
double accuracy_over(const swgcn::Swgcn& model, const std::vector<LabeledWindow>& windows,
                     const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  if (pairs.empty()) return 0.0;
  constexpr std::size_t kBatch = 64;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pairs.size(); i += kBatch) {
    std::vector<Tensor> inputs;
    std::vector<std::size_t> labels;
    for (std::size_t k = i; k < std::min(pairs.size(), i + kBatch); ++k) {
      inputs.push_back(windows[pairs[k].first].views[pairs[k].second]);
      labels.push_back(windows[pairs[k].first].label);
    }
    const Tensor logits = model.forward(swgcn::stack_inputs(inputs)).logits.value();
    for (std::size_t r = 0; r < labels.size(); ++r) correct += argmax_row(logits, r) == labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

void append_log_csv(const fs::path& path, const std::vector<EpochLog>& rows) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (fresh) out << "stage,epoch,train_loss,train_accuracy,val_accuracy,val_map50\n";
  for (const auto& r : rows) {
    out << r.stage << ',' << r.epoch << ',' << r.loss << ',';
    if (r.stage == 1) {
      out << r.train_metric << ',' << r.val_metric << ",\n";
    } else {
      out << ",," << r.val_metric << '\n';
    }
  }
}

void update_manifest(const fs::path& out_dir, const std::string& section, const io::json& body) {
  const fs::path path = out_dir / "manifest.json";
  io::json doc = fs::exists(path) ? io::json::parse(io::read_text(path)) : io::json::object();
  doc["format"] = "tad-run/1";
  doc[section] = body;
  io::write_text(path, doc.dump(2));
}

io::json log_json(const std::vector<EpochLog>& log) {
  io::json arr = io::json::array();
  for (const auto& r : log) {
    arr.push_back({{"epoch", r.epoch}, {"loss", r.loss}, {"train_metric", r.train_metric},
                   {"val_metric", r.val_metric}});
  }
  return arr;
}

void check_finite_loss(double loss, int stage, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw NonFiniteError("stage " + std::to_string(stage) + " diverged: non-finite loss at epoch " +
                         std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

}  // namespace

double window_accuracy(const swgcn::Swgcn& model, const std::vector<LabeledWindow>& windows) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (std::size_t v = 0; v < windows[w].views.size(); ++v) pairs.emplace_back(w, v);
  }
  return accuracy_over(model, windows, pairs);
}

Stage1Result train_stage1(const TrainConfig& config, const fs::path& manifest_path,
                          const fs::path& out_dir) {
  config.validate();
  const data::DatasetManifest manifest = data::read_manifest(manifest_path);
  const auto train = data::load_split(manifest_path, manifest.train);
  const auto val = data::load_split(manifest_path, manifest.val);
  if (train.empty()) throw std::invalid_argument("dataset has no training sequences");
  fs::create_directories(out_dir);

  const auto cameras = make_rig(config);
  const auto train_w = prepare_windows(train, config, cameras);
  const auto val_w = prepare_windows(val, config, cameras);

  swgcn::SwgcnConfig mc = config.swgcn;
  mc.classes = manifest.class_names.size() + 1;
  mc.joints = manifest.joints;
  mc.frames = config.window;
  swgcn::Swgcn model(mc, train.front().topology.edges, config.seed);
  AdamW opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  // Validation uses every third view of each window to bound its cost.
  std::vector<std::pair<std::size_t, std::size_t>> val_pairs;
  for (std::size_t w = 0; w < val_w.size(); ++w) {
    for (std::size_t v = 0; v < cameras.size(); v += 3) val_pairs.emplace_back(w, v);
  }

  Stage1Result result{model, {}, 0, -1.0};
  ParameterSet best = model.params();
  std::vector<std::size_t> order(train_w.size());
  std::iota(order.begin(), order.end(), 0);
  std::uniform_int_distribution<std::size_t> pick_view(0, cameras.size() - 1);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    for (std::size_t i = 0; i < order.size(); i += config.batch) {
      std::vector<Tensor> inputs;
      std::vector<std::size_t> labels;
      for (std::size_t k = i; k < std::min(order.size(), i + config.batch); ++k) {
        const LabeledWindow& w = train_w[order[k]];
        if (config.grouped_views) {
          for (const auto& v : w.views) {
            inputs.push_back(v);
            labels.push_back(w.label);
          }
        } else {
          inputs.push_back(w.views[pick_view(rng)]);
          labels.push_back(w.label);
        }
      }
      GradTape tape;
      const auto out = model.forward(swgcn::stack_inputs(inputs), &tape);
      Var loss = nn::cross_entropy(out.logits, labels);
      check_finite_loss(loss.value().item(), 1, epoch, step);
      Gradients grads = tape.backward(loss);
      grads.clip_global_norm(config.clip_norm);
      opt.step(model.params(), grads);
      ++step;
      loss_sum += loss.value().item() * static_cast<double>(labels.size());
      for (std::size_t r = 0; r < labels.size(); ++r) correct += argmax_row(out.logits.value(), r) == labels[r];
      seen += labels.size();
    }
    EpochLog row{1, epoch, loss_sum / static_cast<double>(seen),
                 static_cast<double>(correct) / static_cast<double>(seen), 0.0};
    row.val_metric = val_pairs.empty() ? row.train_metric : accuracy_over(model, val_w, val_pairs);
    if (row.val_metric > result.best_val_accuracy) {
      result.best_val_accuracy = row.val_metric;
      result.best_epoch = epoch;
      best = model.params();
    }
    log::info("stage1 epoch " + std::to_string(epoch) + " loss " + std::to_string(row.loss) +
              " train_acc " + std::to_string(row.train_metric) + " val_acc " +
              std::to_string(row.val_metric));
    result.log.push_back(row);
  }
  assign_parameters(model.params(), best);
  model.freeze();
  model.save(out_dir / "stage1.ckpt", step);
  result.model = model;

  io::write_text(out_dir / "config.json", config.to_json().dump(2));
  append_log_csv(out_dir / "log.csv", result.log);
  update_manifest(out_dir, "stage1",
                  {{"config", config.to_json()},
                   {"dataset_manifest_hash", io::file_hash(manifest_path)},
                   {"log", log_json(result.log)},
                   {"best_epoch", result.best_epoch},
                   {"checkpoint", "stage1.ckpt"},
                   {"encoder_hash", model.params().hash()}});
  return result;
}

std::vector<eval::Segment> window_ground_truth(const data::SkeletonSequence& seq, std::size_t window,
                                               std::size_t stride) {
  auto segs = eval::extract_segments(data::frame_targets(seq, window, stride), 0.5);
  for (auto& s : segs) {
    s.seq = seq.id;
    s.confidence = 1.0;
  }
  return segs;
}

FeatureGrid sequence_features(const swgcn::Swgcn& encoder, const data::SkeletonSequence& seq,
                              const std::vector<geom::VirtualCamera>& cameras,
                              const TrainConfig& config, const fs::path& cache_dir) {
  const io::json key{{"seq", seq.id},
                     {"views", cameras.size()},
                     {"window", config.window},
                     {"stride", config.stride},
                     {"margin", config.occlusion_margin},
                     {"encoder", encoder.params().hash()}};
  fs::path cache;
  if (!cache_dir.empty()) {
    cache = cache_dir / (seq.id + ".feat");
    if (fs::exists(cache)) {
      io::json meta;
      FeatureGrid grid = load_feature_grid(cache, &meta);
      if (meta == key) return grid;
    }
  }
  swgcn::ExtractOptions opts;
  opts.occlusion_margin = config.occlusion_margin;
  FeatureGrid grid = swgcn::extract_feature_grid(encoder, sequence_windows(seq, config.window, config.stride),
                                                 cameras, seq.topology.torso, opts);
  if (!cache.empty()) {
    fs::create_directories(cache_dir);
    save_feature_grid(cache, grid, key);
  }
  return grid;
}

namespace {

eval::EvalReport evaluate_grids(const hydra::HydraView& model,
                                const std::vector<data::SkeletonSequence>& seqs,
                                const std::vector<FeatureGrid>& grids, const TrainConfig& config,
                                const std::vector<std::string>& class_names,
                                const std::vector<double>& thresholds,
                                std::vector<eval::Segment>* detections) {
  std::vector<eval::SequenceResult> results;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    results.push_back({seqs[i].id, model.predict(grids[i]),
                       window_ground_truth(seqs[i], config.window, config.stride)});
  }
  if (detections) {
    detections->clear();
    for (const auto& r : results) {
      for (auto s : eval::extract_segments(r.probs, 0.5)) {
        s.seq = r.seq;
        detections->push_back(std::move(s));
      }
    }
  }
  return eval::evaluate_sequences(results, class_names, thresholds);
}

std::size_t map50_index(const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - 0.5) < 1e-12) return i;
  }
  throw std::invalid_argument("thresholds must include 0.5");
}

}  // namespace

Stage2Result train_stage2(const TrainConfig& config, const fs::path& manifest_path,
                          const fs::path& stage1_ckpt, const fs::path& out_dir) {
  config.validate();
  if (!fs::exists(stage1_ckpt)) {
    throw std::invalid_argument("missing stage-1 checkpoint: " + stage1_ckpt.string());
  }
  const swgcn::Swgcn encoder = swgcn::Swgcn::load(stage1_ckpt);
  if (!encoder.frozen()) throw std::logic_error("stage-1 checkpoint is not frozen");
  const std::string ckpt_hash_before = io::file_hash(stage1_ckpt);
  const std::uint64_t hash_before = encoder.params().hash();

  const data::DatasetManifest manifest = data::read_manifest(manifest_path);
  const auto train = data::load_split(manifest_path, manifest.train);
  const auto val = data::load_split(manifest_path, manifest.val);
  if (train.empty()) throw std::invalid_argument("dataset has no training sequences");
  if (encoder.config().classes != manifest.class_names.size() + 1) {
    throw std::invalid_argument("stage-1 checkpoint class count does not match the dataset");
  }
  fs::create_directories(out_dir);
  const auto cameras = make_rig(config);
  const fs::path cache = out_dir / "features";
  std::vector<FeatureGrid> train_grids, val_grids;
  std::vector<Tensor> targets;
  for (const auto& s : train) {
    train_grids.push_back(sequence_features(encoder, s, cameras, config, cache));
    targets.push_back(data::frame_targets(s, config.window, config.stride));
  }
  for (const auto& s : val) val_grids.push_back(sequence_features(encoder, s, cameras, config, cache));

  hydra::HydraConfig hc = config.hydra;
  hc.in_channels = encoder.config().dim;
  hc.classes = manifest.class_names.size();
  hydra::HydraView model(hc, config.seed + 1);
  AdamW opt({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  std::mt19937_64 rng(config.seed ^ 0xc2b2ae3d27d4eb4fULL);
  const std::size_t v = cameras.size();
  std::uniform_int_distribution<std::size_t> pick_count(1, v), pick_offset(0, v - 1);
  const std::vector<double> thresholds = eval::default_thresholds();
  const std::size_t i50 = map50_index(thresholds);

  Stage2Result result{model, {}, 0, -1.0, hash_before, 0};
  ParameterSet best = model.params();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += config.batch) {
      GradTape tape;
      Var total;
      std::size_t n = 0;
      for (std::size_t k = i; k < std::min(order.size(), i + config.batch); ++k) {
        const std::size_t s = order[k];
        FeatureGrid grid = train_grids[s];
        if (config.view_subsets && v > 1) {
          const std::size_t count = pick_count(rng), offset = pick_offset(rng);
          std::vector<std::size_t> views(count);
          for (std::size_t q = 0; q < count; ++q) views[q] = (offset + q) % v;
          grid = select_views(grid, views);
        }
        Var l = nn::bce_multilabel(model.forward(grid, &tape), targets[s]);
        total = n == 0 ? l : ops::add(total, l);
        ++n;
      }
      Var loss = ops::scale(total, 1.0 / static_cast<double>(n));
      check_finite_loss(loss.value().item(), 2, epoch, step);
      Gradients grads = tape.backward(loss);
      grads.clip_global_norm(config.clip_norm);
      opt.step(model.params(), grads);
      ++step;
      loss_sum += loss.value().item();
      ++batches;
    }
    EpochLog row{2, epoch, loss_sum / static_cast<double>(batches), 0.0, 0.0};
    if (!val.empty()) {
      row.val_metric = evaluate_grids(model, val, val_grids, config, manifest.class_names, thresholds,
                                      nullptr)
                           .map[i50];
    }
    if (row.val_metric > result.best_val_map) {
      result.best_val_map = row.val_metric;
      result.best_epoch = epoch;
      best = model.params();
    }
    log::info("stage2 epoch " + std::to_string(epoch) + " loss " + std::to_string(row.loss) +
              " val_map50 " + std::to_string(row.val_metric));
    result.log.push_back(row);
  }
  assign_parameters(model.params(), best);
  result.model = model;

  result.encoder_hash_after = encoder.params().hash();
  if (result.encoder_hash_after != hash_before || io::file_hash(stage1_ckpt) != ckpt_hash_before) {
    throw std::logic_error("frozen encoder changed during stage 2");
  }
  model.save(out_dir / "stage2.ckpt", step);
  io::write_text(out_dir / "config.json", config.to_json().dump(2));
  append_log_csv(out_dir / "log.csv", result.log);
  update_manifest(out_dir, "stage2",
                  {{"config", config.to_json()},
                   {"dataset_manifest_hash", io::file_hash(manifest_path)},
                   {"stage1_checkpoint", fs::absolute(stage1_ckpt).string()},
                   {"stage1_checkpoint_hash", ckpt_hash_before},
                   {"log", log_json(result.log)},
                   {"best_epoch", result.best_epoch},
                   {"checkpoint", "stage2.ckpt"},
                   {"encoder_hash_before", hash_before},
                   {"encoder_hash_after", result.encoder_hash_after}});
  return result;
}

Tensor infer(const swgcn::Swgcn& encoder, const hydra::HydraView& model,
             const data::SkeletonSequence& seq, std::size_t views, const TrainConfig& config) {
  if (views == 0) throw std::invalid_argument("infer: at least one view required");
  if (encoder.config().dim != model.config().in_channels) {
    throw std::invalid_argument("infer: encoder feature size does not match the stage-2 model");
  }
  TrainConfig c = config;
  c.views = views;
  return model.predict(sequence_features(encoder, seq, make_rig(c), c));
}

eval::EvalReport evaluate_split(const swgcn::Swgcn& encoder, const hydra::HydraView& model,
                                const std::vector<data::SkeletonSequence>& sequences,
                                std::size_t views, const TrainConfig& config,
                                const std::vector<double>& thresholds,
                                std::vector<eval::Segment>* detections) {
  if (sequences.empty()) throw std::invalid_argument("evaluate: empty test set");
  const std::size_t k = sequences.front().class_count();
  if (model.config().classes != k) {
    throw std::invalid_argument("class vocabulary mismatch: model has " +
                                std::to_string(model.config().classes) + " classes, data has " +
                                std::to_string(k));
  }
  TrainConfig c = config;
  c.views = views;
  const auto cameras = make_rig(c);
  std::vector<FeatureGrid> grids;
  for (const auto& s : sequences) grids.push_back(sequence_features(encoder, s, cameras, c));
  return evaluate_grids(model, sequences, grids, config, sequences.front().class_names, thresholds,
                        detections);
}

}  // namespace tad::pipeline
