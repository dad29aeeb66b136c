#include "tad/dataset.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tad::data {

bool SkeletonTopology::is_tree() const {
  const std::size_t n = joints();
  if (n == 0 || edges.size() + 1 != n) return false;
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) return false;
    const std::size_t ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

SkeletonTopology canonical_skeleton(std::size_t joints) {
  if (joints < kMinJoints || joints > kMaxJoints) {
    throw std::invalid_argument("skeleton joint count must be in [" + std::to_string(kMinJoints) +
                                ", " + std::to_string(kMaxJoints) + "]");
  }
  static const std::vector<std::string> names = {
      "pelvis",  "l_hip",  "r_hip",  "l_shoulder", "r_shoulder", "l_elbow", "l_wrist", "r_elbow",
      "r_wrist", "l_knee", "l_ankle", "r_knee",    "r_ankle",    "neck",    "head"};
  static const std::vector<Edge> edges = {{0, 1}, {0, 2},  {0, 3},   {0, 4},   {3, 5},
                                          {5, 6}, {4, 7},  {7, 8},   {1, 9},   {9, 10},
                                          {2, 11}, {11, 12}, {0, 13}, {13, 14}};
  SkeletonTopology topo;
  topo.joint_names.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(joints));
  for (const auto& e : edges) {
    if (e.second < joints) topo.edges.push_back(e);
  }
  topo.torso = geom::TorsoJoints{3, 4, 2, 1};
  return topo;
}

void SkeletonSequence::validate() const {
  if (frames.rank() != 3 || frames.dim(2) != 3) throw ShapeError("sequence frames must be [N, J, 3]");
  if (frames.dim(1) != topology.joints()) throw std::invalid_argument("frame joints != topology joints");
  if (labels.size() != frame_count()) throw std::invalid_argument("label count != frame count");
  for (const auto& set : labels) {
    for (std::size_t c : set) {
      if (c >= class_count()) throw std::invalid_argument("label index exceeds class count");
    }
  }
  if (!topology.is_tree()) throw std::invalid_argument("skeleton topology is not a tree");
  for (const auto& s : segments) {
    if (!(s.start < s.end && s.end <= frame_count()) || s.cls >= class_count()) {
      throw std::invalid_argument("malformed ground-truth segment");
    }
  }
  if (!all_finite(frames.data())) throw NonFiniteError("sequence contains non-finite coordinates");
}

const std::vector<std::string>& primitive_bank() {
  static const std::vector<std::string> bank = {"raise_arms", "walk", "squat", "wave",
                                                "kick",       "jump", "bow",   "punch"};
  return bank;
}

namespace {

using geom::Vec3;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Pose {
  Vec3 root_offset = Vec3::Zero();
  double trunk_pitch = 0.0;
  double abduct[2] = {0.0, 0.0};  // [left, right]
  double flex[2] = {0.0, 0.0};
  double elbow[2] = {0.0, 0.0};
  double hip[2] = {0.0, 0.0};
  double knee[2] = {0.0, 0.0};
};

struct Body {
  double pelvis_height = 1.0;
  double hip_half_width = 0.1;
  double shoulder_half_width = 0.2;
  double shoulder_height = 0.45;
  double neck_height = 0.5;
  double head_height = 0.7;
  double upper_arm = 0.3;
  double forearm = 0.28;
  double thigh = 0.45;
  double shin = 0.45;
};

Eigen::Matrix3d rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

// Body frame: +y up, +z forward, +x to the subject's left.
std::array<Vec3, kMaxJoints> pose_joints(const Pose& p, const Body& b) {
  std::array<Vec3, kMaxJoints> j;
  const Vec3 down(0.0, -1.0, 0.0);
  const Vec3 pelvis = Vec3(0.0, b.pelvis_height, 0.0) + p.root_offset;
  const Eigen::Matrix3d trunk = rot_x(p.trunk_pitch);
  j[0] = pelvis;
  j[1] = pelvis + Vec3(b.hip_half_width, 0.0, 0.0);
  j[2] = pelvis + Vec3(-b.hip_half_width, 0.0, 0.0);
  j[3] = pelvis + trunk * Vec3(b.shoulder_half_width, b.shoulder_height, 0.0);
  j[4] = pelvis + trunk * Vec3(-b.shoulder_half_width, b.shoulder_height, 0.0);
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    const Eigen::Matrix3d frame = trunk * rot_z(sign * p.abduct[side]);
    const Vec3 upper = frame * rot_x(-p.flex[side]) * down;
    const Vec3 fore = frame * rot_x(-(p.flex[side] + p.elbow[side])) * down;
    const Vec3& shoulder = j[3 + static_cast<std::size_t>(side)];
    const Vec3 elbow = shoulder + b.upper_arm * upper;
    j[5 + 2 * static_cast<std::size_t>(side)] = elbow;
    j[6 + 2 * static_cast<std::size_t>(side)] = elbow + b.forearm * fore;

    const Vec3 thigh = rot_x(-p.hip[side]) * down;
    const Vec3 shin = rot_x(-(p.hip[side] - p.knee[side])) * down;
    const Vec3& hip = j[1 + static_cast<std::size_t>(side)];
    const Vec3 knee = hip + b.thigh * thigh;
    j[9 + 2 * static_cast<std::size_t>(side)] = knee;
    j[10 + 2 * static_cast<std::size_t>(side)] = knee + b.shin * shin;
  }
  j[13] = pelvis + trunk * Vec3(0.0, b.neck_height, 0.0);
  j[14] = pelvis + trunk * Vec3(0.0, b.head_height, 0.0);
  return j;
}

struct Variation {
  double amplitude = 1.0;
  double period_scale = 1.0;
};

// Adds the primitive's deviation from rest (scaled by env) to the pose.
void apply_primitive(std::size_t cls, double tau, double env, const Variation& var,
                     const Body& body, Pose& p) {
  const double a = var.amplitude * env;
  auto omega = [&](double period) { return kTwoPi / (period * var.period_scale); };
  switch (cls) {
    case 0: {  // raise_arms
      const double v = 0.25 + 0.75 * 0.5 * (1.0 - std::cos(omega(2.0) * tau));
      p.abduct[0] += 2.5 * a * v;
      p.abduct[1] += 2.5 * a * v;
      p.elbow[0] += 0.2 * a * v;
      p.elbow[1] += 0.2 * a * v;
      break;
    }
    case 1: {  // walk
      const double s = std::sin(omega(1.1) * tau);
      p.hip[0] += 0.45 * a * s;
      p.hip[1] -= 0.45 * a * s;
      p.knee[0] += 0.7 * a * std::max(0.0, -s);
      p.knee[1] += 0.7 * a * std::max(0.0, s);
      p.flex[0] -= 0.35 * a * s;
      p.flex[1] += 0.35 * a * s;
      p.root_offset.y() += 0.03 * a * std::abs(s);
      break;
    }
    case 2: {  // squat
      const double v = 0.2 + 0.8 * 0.5 * (1.0 - std::cos(omega(2.4) * tau));
      const double knee = 1.9 * a * v, hip = 1.0 * a * v;
      for (int s = 0; s < 2; ++s) {
        p.knee[s] += knee;
        p.hip[s] += hip;
        p.flex[s] += 1.2 * a * v;
      }
      p.trunk_pitch += 0.35 * a * v;
      const double leg = body.thigh * std::cos(hip) + body.shin * std::cos(hip - knee);
      p.root_offset.y() -= (body.thigh + body.shin) - leg;
      break;
    }
    case 3: {  // wave
      p.abduct[1] += 2.3 * a;
      p.elbow[1] += a * (0.9 + 0.5 * std::sin(omega(0.8) * tau));
      break;
    }
    case 4: {  // kick
      const double v = 0.15 + 0.85 * 0.5 * (1.0 - std::cos(omega(1.4) * tau));
      p.hip[1] += 1.3 * a * v;
      p.knee[1] += 2.0 * a * v * (1.0 - v);
      p.abduct[0] += 0.6 * a;
      p.abduct[1] += 0.6 * a;
      break;
    }
    case 5: {  // jump
      const double s = std::sin(omega(1.0) * tau);
      const double air = std::max(0.0, s), crouch = std::max(0.0, -s);
      p.root_offset.y() += a * (0.3 * air - 0.15 * crouch);
      for (int k = 0; k < 2; ++k) {
        p.knee[k] += 1.0 * a * crouch;
        p.hip[k] += 0.6 * a * crouch;
        p.flex[k] += 1.2 * a * air;
      }
      break;
    }
    case 6: {  // bow
      const double v = 0.25 + 0.75 * 0.5 * (1.0 - std::cos(omega(2.6) * tau));
      p.trunk_pitch += 1.0 * a * v;
      p.flex[0] += 0.3 * a * v;
      p.flex[1] += 0.3 * a * v;
      break;
    }
    case 7: {  // punch
      const double s = std::sin(omega(0.9) * tau);
      const double left = std::max(0.0, s), right = std::max(0.0, -s);
      p.flex[0] += a * (0.6 + 0.9 * left);
      p.flex[1] += a * (0.6 + 0.9 * right);
      p.elbow[0] += a * 1.6 * (1.0 - left);
      p.elbow[1] += a * 1.6 * (1.0 - right);
      break;
    }
    default:
      throw std::out_of_range("unknown motion primitive");
  }
}

void apply_idle(double tau, Pose& p) {
  p.trunk_pitch += 0.03 * std::sin(kTwoPi * tau / 4.0);
  p.abduct[0] += 0.05 * (1.0 + std::sin(kTwoPi * tau / 3.0));
  p.abduct[1] += 0.05 * (1.0 + std::sin(kTwoPi * tau / 3.5));
}

double envelope(std::size_t t, std::size_t len) {
  constexpr double kRamp = 6.0;
  const double edge = static_cast<double>(std::min(t, len - 1 - t));
  const double x = std::min(1.0, edge / kRamp);
  return x * x * (3.0 - 2.0 * x);
}

std::string sequence_id(const std::string& prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << '_' << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

std::vector<std::vector<std::size_t>> labels_from_segments(
    std::size_t frames, const std::vector<GroundTruthSegment>& segments) {
  std::vector<std::vector<std::size_t>> labels(frames);
  for (const auto& s : segments) {
    for (std::size_t f = s.start; f < std::min(s.end, frames); ++f) labels[f].push_back(s.cls);
  }
  for (auto& set : labels) {
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  return labels;
}

std::vector<SkeletonSequence> generate_synthetic(const GeneratorConfig& cfg) {
  if (cfg.classes < 2) throw std::invalid_argument("generator needs at least 2 classes");
  if (cfg.classes > primitive_bank().size()) {
    throw std::invalid_argument("requested " + std::to_string(cfg.classes) +
                                " classes but the primitive bank has " +
                                std::to_string(primitive_bank().size()));
  }
  if (cfg.boundary_quantum == 0 || cfg.min_action_quanta == 0 ||
      cfg.min_action_quanta > cfg.max_action_quanta || cfg.min_idle_quanta == 0 ||
      cfg.min_idle_quanta > cfg.max_idle_quanta) {
    throw std::invalid_argument("invalid segment length configuration");
  }
  const SkeletonTopology topo = canonical_skeleton(cfg.joints);
  const Body body;

  std::mt19937_64 deck_rng(cfg.seed);
  std::vector<std::size_t> deck;
  auto next_class = [&]() {
    if (deck.empty()) {
      deck.resize(cfg.classes);
      for (std::size_t i = 0; i < cfg.classes; ++i) deck[i] = i;
      std::shuffle(deck.begin(), deck.end(), deck_rng);
    }
    const std::size_t c = deck.back();
    deck.pop_back();
    return c;
  };

  std::vector<SkeletonSequence> out;
  out.reserve(cfg.sequences);
  std::vector<char> seen(cfg.classes, 0);
  for (std::size_t i = 0; i < cfg.sequences; ++i) {
    std::seed_seq seq_seed{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                           static_cast<std::uint32_t>(i), 0x5eedu};
    std::mt19937_64 rng(seq_seed);
    auto quanta = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng) * cfg.boundary_quantum;
    };

    SkeletonSequence seq;
    seq.id = sequence_id(cfg.id_prefix, i);
    seq.fps = cfg.fps;
    seq.topology = topo;
    seq.class_names.assign(primitive_bank().begin(),
                           primitive_bank().begin() + static_cast<std::ptrdiff_t>(cfg.classes));

    std::size_t t = quanta(cfg.min_idle_quanta, cfg.max_idle_quanta);
    const std::size_t min_action = cfg.min_action_quanta * cfg.boundary_quantum;
    while (t < cfg.frames) {
      std::size_t len = quanta(cfg.min_action_quanta, cfg.max_action_quanta);
      if (t + len > cfg.frames) {
        if (cfg.frames - t < min_action) break;
        len = cfg.frames - t;
      }
      const std::size_t cls = next_class();
      seen[cls] = 1;
      seq.segments.push_back({cls, t, t + len});
      t += len + quanta(cfg.min_idle_quanta, cfg.max_idle_quanta);
    }

    std::uniform_real_distribution<double> heading_dist(0.0, kTwoPi);
    const double heading = cfg.random_heading ? heading_dist(rng) : 0.0;
    const Eigen::Matrix3d yaw = geom::yaw_rotation(heading);
    std::uniform_real_distribution<double> amp(0.8, 1.2), per(0.85, 1.15);
    std::vector<Variation> vars(seq.segments.size());
    for (auto& v : vars) v = {amp(rng), per(rng)};
    std::normal_distribution<double> noise(0.0, cfg.joint_noise);

    seq.frames = Tensor(Shape{cfg.frames, cfg.joints, 3});
    for (std::size_t f = 0; f < cfg.frames; ++f) {
      Pose pose;
      const double tau = static_cast<double>(f) / cfg.fps;
      apply_idle(tau, pose);
      for (std::size_t s = 0; s < seq.segments.size(); ++s) {
        const auto& seg = seq.segments[s];
        if (f < seg.start || f >= seg.end) continue;
        const std::size_t local = f - seg.start;
        apply_primitive(seg.cls, static_cast<double>(local) / cfg.fps,
                        envelope(local, seg.end - seg.start), vars[s], body, pose);
      }
      const auto joints = pose_joints(pose, body);
      for (std::size_t j = 0; j < cfg.joints; ++j) {
        const Vec3 w = yaw * joints[j];
        for (int k = 0; k < 3; ++k) seq.frames.at(f, j, static_cast<std::size_t>(k)) = w[k] + noise(rng);
      }
    }
    seq.labels = labels_from_segments(cfg.frames, seq.segments);
    seq.validate();
    out.push_back(std::move(seq));
  }

  std::size_t total_segments = 0;
  for (const auto& s : out) total_segments += s.segments.size();
  if (total_segments >= cfg.classes) {
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      if (!seen[c]) throw std::logic_error("generator audit: class " + std::to_string(c) + " never emitted");
    }
  }
  return out;
}

std::size_t window_count(std::size_t frames, std::size_t length, std::size_t stride) {
  if (frames == 0) throw std::invalid_argument("empty sequence");
  if (length < 2) throw std::invalid_argument("window length must be at least 2");
  if (stride == 0) throw std::invalid_argument("window stride must be at least 1");
  if (frames <= length) return 1;
  return (frames - length + stride - 1) / stride + 1;
}

WindowBatch split_windows(const SkeletonSequence& seq, std::size_t length, std::size_t stride) {
  const std::size_t n = seq.frame_count();
  const std::size_t count = window_count(n, length, stride);
  const std::size_t joints = seq.frames.dim(1);
  const std::size_t k = seq.class_count();
  WindowBatch batch;
  batch.length = length;
  batch.stride = stride;
  batch.background = k;
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    geom::SkeletonWindow3D win{Tensor(Shape{length, joints, 3})};
    std::vector<std::size_t> votes(k + 1, 0);
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t f = std::min(start + i, n - 1);
      std::copy_n(seq.frames.data().begin() + static_cast<std::ptrdiff_t>(f * joints * 3), joints * 3,
                  win.joints.data().begin() + static_cast<std::ptrdiff_t>(i * joints * 3));
      if (seq.labels[f].empty()) {
        ++votes[k];
      } else {
        for (std::size_t c : seq.labels[f]) ++votes[c];
      }
    }
    const auto best = std::max_element(votes.begin(), votes.end());
    batch.windows.push_back(std::move(win));
    batch.starts.push_back(start);
    batch.labels.push_back(static_cast<std::size_t>(best - votes.begin()));
  }
  return batch;
}

Tensor frame_targets(const SkeletonSequence& seq, std::size_t length, std::size_t stride) {
  const std::size_t n = seq.frame_count();
  const std::size_t count = window_count(n, length, stride);
  const std::size_t k = seq.class_count();
  Tensor targets(Shape{count, k});
  for (std::size_t w = 0; w < count; ++w) {
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t f = std::min(w * stride + i, n - 1);
      for (std::size_t c : seq.labels[f]) targets.at(w, c) = 1.0;
    }
  }
  return targets;
}

void write_sequence(const std::filesystem::path& path, const SkeletonSequence& seq) {
  seq.validate();
  io::json header;
  header["format"] = "tad-skel/1";
  header["id"] = seq.id;
  header["fps"] = seq.fps;
  header["frames"] = seq.frame_count();
  header["joints"] = seq.topology.joints();
  header["joint_names"] = seq.topology.joint_names;
  header["edges"] = seq.topology.edges;
  const auto& t = seq.topology.torso;
  header["torso"] = {{"left_shoulder", t.left_shoulder},
                     {"right_shoulder", t.right_shoulder},
                     {"right_hip", t.right_hip},
                     {"left_hip", t.left_hip}};
  header["class_names"] = seq.class_names;
  header["segments"] = io::json::array();
  for (const auto& s : seq.segments) {
    header["segments"].push_back({{"class", s.cls}, {"start", s.start}, {"end", s.end}});
  }
  std::vector<std::uint8_t> payload;
  io::append_f32(payload, seq.frames.data());
  io::write_framed(path, header, payload);
}

SkeletonSequence read_sequence(const std::filesystem::path& path) {
  const io::FramedFile f = io::read_framed(path);
  const auto& h = f.header;
  if (h.value("format", "") != "tad-skel/1") throw std::runtime_error("not a .skel file: " + path.string());
  SkeletonSequence seq;
  seq.id = h.at("id").get<std::string>();
  seq.fps = h.at("fps").get<double>();
  const auto frames = h.at("frames").get<std::size_t>();
  const auto joints = h.at("joints").get<std::size_t>();
  seq.topology.joint_names = h.at("joint_names").get<std::vector<std::string>>();
  seq.topology.edges = h.at("edges").get<std::vector<Edge>>();
  const auto& t = h.at("torso");
  seq.topology.torso = geom::TorsoJoints{t.at("left_shoulder").get<std::size_t>(),
                                         t.at("right_shoulder").get<std::size_t>(),
                                         t.at("right_hip").get<std::size_t>(),
                                         t.at("left_hip").get<std::size_t>()};
  seq.class_names = h.at("class_names").get<std::vector<std::string>>();
  for (const auto& s : h.at("segments")) {
    seq.segments.push_back({s.at("class").get<std::size_t>(), s.at("start").get<std::size_t>(),
                            s.at("end").get<std::size_t>()});
  }
  const std::size_t count = frames * joints * 3;
  if (f.payload.size() != count * 4) throw std::runtime_error("payload size mismatch in " + path.string());
  seq.frames = Tensor(Shape{frames, joints, 3}, io::read_f32(f.payload, 0, count));
  seq.labels = labels_from_segments(frames, seq.segments);
  seq.validate();
  return seq;
}

io::json DatasetManifest::to_json() const {
  return io::json{{"format", "tad-manifest/1"}, {"classes", class_names}, {"joints", joints},
                  {"fps", fps},                 {"seed", seed},           {"train", train},
                  {"val", val},                 {"test", test}};
}

DatasetManifest DatasetManifest::from_json(const io::json& doc) {
  if (doc.value("format", "") != "tad-manifest/1") throw std::runtime_error("not a dataset manifest");
  DatasetManifest m;
  m.class_names = doc.at("classes").get<std::vector<std::string>>();
  m.joints = doc.at("joints").get<std::size_t>();
  m.fps = doc.at("fps").get<double>();
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.train = doc.at("train").get<std::vector<std::string>>();
  m.val = doc.at("val").get<std::vector<std::string>>();
  m.test = doc.at("test").get<std::vector<std::string>>();
  return m;
}

DatasetManifest write_dataset(const std::filesystem::path& dir,
                              const std::vector<SkeletonSequence>& sequences,
                              const SplitFractions& split, std::uint64_t seed) {
  if (sequences.empty()) throw std::invalid_argument("no sequences to write");
  std::filesystem::create_directories(dir);
  const std::size_t n = sequences.size();
  const auto n_test = static_cast<std::size_t>(std::round(split.test * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::round(split.val * static_cast<double>(n)));
  if (n_test + n_val >= n) throw std::invalid_argument("split leaves no training sequences");
  const std::size_t n_train = n - n_val - n_test;

  DatasetManifest m;
  m.class_names = sequences.front().class_names;
  m.joints = sequences.front().topology.joints();
  m.fps = sequences.front().fps;
  m.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = sequences[i].id + ".skel";
    write_sequence(dir / name, sequences[i]);
    (i < n_train ? m.train : i < n_train + n_val ? m.val : m.test).push_back(name);
  }
  io::write_text(dir / "manifest.json", m.to_json().dump(2));
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& manifest_path) {
  return DatasetManifest::from_json(io::json::parse(io::read_text(manifest_path)));
}

std::vector<SkeletonSequence> load_split(const std::filesystem::path& manifest_path,
                                         const std::vector<std::string>& files) {
  std::vector<SkeletonSequence> out;
  for (const auto& f : files) out.push_back(read_sequence(manifest_path.parent_path() / f));
  return out;
}

}  // namespace tad::data
