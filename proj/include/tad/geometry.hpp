#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "tad/tensor.hpp"

namespace tad::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole camera. Camera coordinates are x_c = rotation * (X - position),
// with +z_c the viewing direction and +y_c pointing down in the image.
struct VirtualCamera {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  double focal = 1.0;
  Vec2 principal = Vec2::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * (world - position); }
  // Horizontal angle of the camera position around the vertical axis, in
  // degrees within [0, 360).
  double yaw_degrees() const;
  void validate() const;
};

struct RigConfig {
  std::size_t views = 12;
  double spacing_deg = 30.0;
  double radius = 3.0;
  double height = 0.0;  // relative to the skeleton root
  double focal = 1.0;
  double elevation_deg = 0.0;
};

// Camera i sits at yaw i * spacing on a circle of `radius` around the
// vertical axis through the origin, looking at (0, height, 0).
std::vector<VirtualCamera> make_virtual_cameras(const RigConfig& config);
VirtualCamera look_at(const Vec3& position, const Vec3& target, double focal);

// [F, J, 3] world-space joint positions of one temporal window.
struct SkeletonWindow3D {
  Tensor joints;

  std::size_t frames() const { return joints.dim(0); }
  std::size_t joint_count() const { return joints.dim(1); }
  Vec3 joint(std::size_t f, std::size_t j) const {
    return {joints.at(f, j, 0), joints.at(f, j, 1), joints.at(f, j, 2)};
  }
};

struct ProjectedWindow {
  Tensor joints2d;                   // [F, J, 2]
  std::vector<std::uint8_t> visible;  // F * J, row-major
  std::size_t view = 0;

  std::size_t frames() const { return joints2d.dim(0); }
  std::size_t joint_count() const { return joints2d.dim(1); }
  bool is_visible(std::size_t f, std::size_t j) const { return visible[f * joint_count() + j] != 0; }
  std::size_t visible_count() const;
};

// Indices of the four joints spanning the torso quadrilateral.
struct TorsoJoints {
  std::size_t left_shoulder = 3;
  std::size_t right_shoulder = 4;
  std::size_t right_hip = 2;
  std::size_t left_hip = 1;

  std::array<std::size_t, 4> ring() const {
    return {left_shoulder, right_shoulder, right_hip, left_hip};
  }
  bool contains(std::size_t j) const {
    return j == left_shoulder || j == right_shoulder || j == right_hip || j == left_hip;
  }
};

struct TorsoPlane {
  Vec3 anchor = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 axis_u = Vec3::UnitX();  // in-plane basis
  Vec3 axis_v = Vec3::UnitY();
  std::vector<Vec2> polygon;  // torso corners in (axis_u, axis_v) coordinates

  Vec2 to_plane(const Vec3& p) const {
    const Vec3 d = p - anchor;
    return {d.dot(axis_u), d.dot(axis_v)};
  }
  // Plane through `anchor` with the given normal and a polygon given in
  // world coordinates (projected onto the plane).
  static TorsoPlane from_polygon(const Vec3& anchor, const Vec3& normal,
                                 const std::vector<Vec3>& corners);
};

class DegenerateTorso : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Least-squares plane through the torso corners (given in ring order).
TorsoPlane fit_torso_plane(const std::array<Vec3, 4>& corners);

// True when the open segment camera -> joint crosses the plane strictly
// between its ends at a point inside the polygon grown by `margin`.
bool segment_hits_torso(const TorsoPlane& plane, const Vec3& camera_center, const Vec3& joint,
                        double margin = 0.0);

bool point_in_polygon(const std::vector<Vec2>& polygon, const Vec2& p, double margin = 0.0);

// Pinhole projection of every joint; joints with non-positive depth are
// marked invisible and zeroed.
ProjectedWindow project_window(const SkeletonWindow3D& window, const VirtualCamera& camera,
                               std::size_t view = 0);

// Clears visibility (and zeroes coordinates) of non-torso joints hidden
// behind the torso polygon of their frame. `planes[f]` may be missing
// (nullptr-equivalent: empty polygon) for frames whose torso is degenerate.
void occlusion_mask(ProjectedWindow& projected, const SkeletonWindow3D& window,
                    const VirtualCamera& camera, const std::vector<TorsoPlane>& planes,
                    const TorsoJoints& torso, double margin = 0.0);

// Per-frame torso planes; degenerate frames yield a plane with an empty
// polygon (nothing occluded) and a warning.
std::vector<TorsoPlane> fit_window_planes(const SkeletonWindow3D& window, const TorsoJoints& torso);

std::vector<ProjectedWindow> render_views(const SkeletonWindow3D& window,
                                          const std::vector<VirtualCamera>& cameras,
                                          const TorsoJoints& torso, double margin = 0.0);

// Recovers the world point on the ray through pixel `uv` at camera depth z.
Vec3 back_project(const VirtualCamera& camera, const Vec2& uv, double depth);

// Shifts and scales visible 2D joints to zero mean and unit RMS radius over
// the window; invisible joints stay zero.
ProjectedWindow normalize_window(const ProjectedWindow& projected);

// Translates the window so joint `root` of the first frame sits at the origin.
SkeletonWindow3D center_on_root(const SkeletonWindow3D& window, std::size_t root = 0);

// Rotation about the vertical (+y) axis.
Mat3 yaw_rotation(double radians);

void save_rig(const std::filesystem::path& path, const std::vector<VirtualCamera>& cameras);
std::vector<VirtualCamera> load_rig(const std::filesystem::path& path);

}  // namespace tad::geom
