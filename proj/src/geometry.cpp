#include "tad/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <string>

#include "tad/io.hpp"
#include "tad/log.hpp"

namespace tad::geom {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

double VirtualCamera::yaw_degrees() const {
  double deg = std::atan2(position.x(), position.z()) / kDegToRad;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0 - 1e-9) deg = 0.0;
  return deg;
}

void VirtualCamera::validate() const {
  if (!(focal > 0.0)) throw std::invalid_argument("camera focal length must be positive");
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("camera rotation is not orthonormal");
  }
}

Mat3 yaw_rotation(double radians) {
  return Eigen::AngleAxisd(radians, Vec3::UnitY()).toRotationMatrix();
}

VirtualCamera look_at(const Vec3& position, const Vec3& target, double focal) {
  const Vec3 forward = (target - position).normalized();
  Vec3 right = forward.cross(Vec3::UnitY());
  if (right.norm() < 1e-12) throw std::invalid_argument("look_at: viewing direction is vertical");
  right.normalize();
  const Vec3 down = forward.cross(right);
  VirtualCamera cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.position = position;
  cam.focal = focal;
  return cam;
}

std::vector<VirtualCamera> make_virtual_cameras(const RigConfig& config) {
  if (config.views == 0) throw std::invalid_argument("virtual camera rig needs at least one view");
  if (!(config.spacing_deg > 0.0)) throw std::invalid_argument("camera spacing must be positive");
  if (!(config.radius > 0.0)) throw std::invalid_argument("camera radius must be positive");
  const double elev = config.elevation_deg * kDegToRad;
  const Vec3 target(0.0, config.height, 0.0);
  const Vec3 base(0.0, config.height + config.radius * std::sin(elev),
                  config.radius * std::cos(elev));
  std::vector<VirtualCamera> cams;
  cams.reserve(config.views);
  for (std::size_t i = 0; i < config.views; ++i) {
    const Mat3 yaw = yaw_rotation(static_cast<double>(i) * config.spacing_deg * kDegToRad);
    cams.push_back(look_at(yaw * base, target, config.focal));
  }
  return cams;
}

std::size_t ProjectedWindow::visible_count() const {
  std::size_t n = 0;
  for (auto v : visible) n += v ? 1 : 0;
  return n;
}

TorsoPlane TorsoPlane::from_polygon(const Vec3& anchor, const Vec3& normal,
                                    const std::vector<Vec3>& corners) {
  TorsoPlane plane;
  plane.anchor = anchor;
  plane.normal = normal.normalized();
  Vec3 seed = std::abs(plane.normal.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  if (corners.size() >= 2) {
    const Vec3 edge = corners[1] - corners[0];
    const Vec3 in_plane = edge - edge.dot(plane.normal) * plane.normal;
    if (in_plane.norm() > 1e-12) seed = in_plane;
  }
  plane.axis_u = (seed - seed.dot(plane.normal) * plane.normal).normalized();
  plane.axis_v = plane.normal.cross(plane.axis_u);
  for (const auto& c : corners) plane.polygon.push_back(plane.to_plane(c));
  return plane;
}

TorsoPlane fit_torso_plane(const std::array<Vec3, 4>& corners) {
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corners) centroid += c;
  centroid /= 4.0;
  Mat3 cov = Mat3::Zero();
  double scale = 0.0;
  for (const auto& c : corners) {
    const Vec3 d = c - centroid;
    cov += d * d.transpose();
    scale = std::max(scale, d.squaredNorm());
  }
  if (!(scale > 1e-18)) throw DegenerateTorso("torso joints coincide");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  // Collinear corners leave only one direction with spread.
  if (eig.eigenvalues()(1) < 1e-10 * scale) throw DegenerateTorso("torso joints are collinear");
  Vec3 normal = eig.eigenvectors().col(0);
  // Orient consistently with the ring winding (Newell normal).
  Vec3 ring = Vec3::Zero();
  for (std::size_t i = 0; i < 4; ++i) ring += corners[i].cross(corners[(i + 1) % 4]);
  if (normal.dot(ring) < 0.0) normal = -normal;

  TorsoPlane plane =
      TorsoPlane::from_polygon(centroid, normal, std::vector<Vec3>(corners.begin(), corners.end()));
  double area = 0.0;
  for (std::size_t i = 0; i < plane.polygon.size(); ++i) {
    const Vec2& a = plane.polygon[i];
    const Vec2& b = plane.polygon[(i + 1) % plane.polygon.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  if (std::abs(area) * 0.5 < 1e-12) throw DegenerateTorso("torso polygon has zero area");
  return plane;
}

namespace {
double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}
}  // namespace

bool point_in_polygon(const std::vector<Vec2>& polygon, const Vec2& p, double margin) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  if (inside || margin <= 0.0) return inside;
  for (std::size_t i = 0; i < n; ++i) {
    if (segment_distance(p, polygon[i], polygon[(i + 1) % n]) <= margin) return true;
  }
  return false;
}

bool segment_hits_torso(const TorsoPlane& plane, const Vec3& camera_center, const Vec3& joint,
                        double margin) {
  if (plane.polygon.size() < 3) return false;
  const Vec3 dir = joint - camera_center;
  const double denom = plane.normal.dot(dir);
  if (std::abs(denom) < 1e-12) return false;
  const double s = plane.normal.dot(plane.anchor - camera_center) / denom;
  constexpr double kEndTol = 1e-9;
  if (s <= kEndTol || s >= 1.0 - kEndTol) return false;
  return point_in_polygon(plane.polygon, plane.to_plane(camera_center + s * dir), margin);
}

ProjectedWindow project_window(const SkeletonWindow3D& window, const VirtualCamera& camera,
                               std::size_t view) {
  const std::size_t frames = window.frames(), joints = window.joint_count();
  ProjectedWindow out;
  out.view = view;
  out.joints2d = Tensor(Shape{frames, joints, 2});
  out.visible.assign(frames * joints, 1);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < joints; ++j) {
      const Vec3 pc = camera.to_camera(window.joint(f, j));
      if (!(pc.z() > 0.0)) {
        out.visible[f * joints + j] = 0;
        continue;
      }
      out.joints2d.at(f, j, 0) = camera.focal * pc.x() / pc.z() + camera.principal.x();
      out.joints2d.at(f, j, 1) = camera.focal * pc.y() / pc.z() + camera.principal.y();
    }
  }
  return out;
}

std::vector<TorsoPlane> fit_window_planes(const SkeletonWindow3D& window, const TorsoJoints& torso) {
  std::vector<TorsoPlane> planes(window.frames());
  const auto ring = torso.ring();
  for (std::size_t f = 0; f < window.frames(); ++f) {
    std::array<Vec3, 4> corners;
    for (std::size_t i = 0; i < 4; ++i) corners[i] = window.joint(f, ring[i]);
    try {
      planes[f] = fit_torso_plane(corners);
    } catch (const DegenerateTorso& e) {
      planes[f].polygon.clear();
      log::warn("frame " + std::to_string(f) + ": " + e.what() + "; no occlusion applied");
    }
  }
  return planes;
}

void occlusion_mask(ProjectedWindow& projected, const SkeletonWindow3D& window,
                    const VirtualCamera& camera, const std::vector<TorsoPlane>& planes,
                    const TorsoJoints& torso, double margin) {
  const std::size_t frames = window.frames(), joints = window.joint_count();
  if (planes.size() != frames) throw std::invalid_argument("occlusion_mask: one plane per frame required");
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (torso.contains(j) || !projected.is_visible(f, j)) continue;
      if (segment_hits_torso(planes[f], camera.position, window.joint(f, j), margin)) {
        projected.visible[f * joints + j] = 0;
        projected.joints2d.at(f, j, 0) = 0.0;
        projected.joints2d.at(f, j, 1) = 0.0;
      }
    }
  }
}

std::vector<ProjectedWindow> render_views(const SkeletonWindow3D& window,
                                          const std::vector<VirtualCamera>& cameras,
                                          const TorsoJoints& torso, double margin) {
  const auto planes = fit_window_planes(window, torso);
  std::vector<ProjectedWindow> views;
  views.reserve(cameras.size());
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    ProjectedWindow pw = project_window(window, cameras[v], v);
    occlusion_mask(pw, window, cameras[v], planes, torso, margin);
    views.push_back(std::move(pw));
  }
  return views;
}

Vec3 back_project(const VirtualCamera& camera, const Vec2& uv, double depth) {
  const Vec3 pc((uv.x() - camera.principal.x()) * depth / camera.focal,
                (uv.y() - camera.principal.y()) * depth / camera.focal, depth);
  return camera.rotation.transpose() * pc + camera.position;
}

ProjectedWindow normalize_window(const ProjectedWindow& projected) {
  ProjectedWindow out = projected;
  const std::size_t frames = projected.frames(), joints = projected.joint_count();
  Vec2 mean = Vec2::Zero();
  std::size_t count = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (!projected.is_visible(f, j)) continue;
      mean += Vec2(projected.joints2d.at(f, j, 0), projected.joints2d.at(f, j, 1));
      ++count;
    }
  }
  if (count == 0) return out;
  mean /= static_cast<double>(count);
  double ms = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (!projected.is_visible(f, j)) continue;
      ms += (Vec2(projected.joints2d.at(f, j, 0), projected.joints2d.at(f, j, 1)) - mean)
                .squaredNorm();
    }
  }
  const double rms = std::sqrt(ms / static_cast<double>(count));
  const double inv = rms > 1e-12 ? 1.0 / rms : 1.0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (!projected.is_visible(f, j)) continue;
      out.joints2d.at(f, j, 0) = (projected.joints2d.at(f, j, 0) - mean.x()) * inv;
      out.joints2d.at(f, j, 1) = (projected.joints2d.at(f, j, 1) - mean.y()) * inv;
    }
  }
  return out;
}

SkeletonWindow3D center_on_root(const SkeletonWindow3D& window, std::size_t root) {
  if (root >= window.joint_count()) throw std::out_of_range("root joint out of range");
  SkeletonWindow3D out = window;
  const Vec3 origin = window.joint(0, root);
  for (std::size_t f = 0; f < window.frames(); ++f) {
    for (std::size_t j = 0; j < window.joint_count(); ++j) {
      for (int k = 0; k < 3; ++k) out.joints.at(f, j, static_cast<std::size_t>(k)) -= origin[k];
    }
  }
  return out;
}

void save_rig(const std::filesystem::path& path, const std::vector<VirtualCamera>& cameras) {
  io::json rig = io::json::array();
  for (const auto& c : cameras) {
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) rot[static_cast<std::size_t>(r * 3 + k)] = c.rotation(r, k);
    }
    rig.push_back({{"rotation", rot},
                   {"position", {c.position.x(), c.position.y(), c.position.z()}},
                   {"focal", c.focal},
                   {"principal", {c.principal.x(), c.principal.y()}}});
  }
  io::write_text(path, io::json{{"cameras", rig}}.dump(2));
}

std::vector<VirtualCamera> load_rig(const std::filesystem::path& path) {
  const io::json doc = io::json::parse(io::read_text(path));
  std::vector<VirtualCamera> cams;
  for (const auto& c : doc.at("cameras")) {
    const auto rot = c.at("rotation").get<std::vector<double>>();
    const auto pos = c.at("position").get<std::vector<double>>();
    const auto pp = c.at("principal").get<std::vector<double>>();
    if (rot.size() != 9 || pos.size() != 3 || pp.size() != 2) {
      throw std::runtime_error("malformed camera entry in " + path.string());
    }
    VirtualCamera cam;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) cam.rotation(r, k) = rot[static_cast<std::size_t>(r * 3 + k)];
    }
    cam.position = Vec3(pos[0], pos[1], pos[2]);
    cam.focal = c.at("focal").get<double>();
    cam.principal = Vec2(pp[0], pp[1]);
    cam.validate();
    cams.push_back(cam);
  }
  return cams;
}

}  // namespace tad::geom
