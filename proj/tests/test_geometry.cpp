#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "doctest.h"
#include "support.hpp"
#include "tad/geometry.hpp"

using namespace tad;
using namespace tad::geom;
using testing::Gen;

namespace {

SkeletonWindow3D window_from(const std::vector<Vec3>& joints, std::size_t frames = 1) {
  SkeletonWindow3D w{Tensor(Shape{frames, joints.size(), 3})};
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < joints.size(); ++j) {
      for (int a = 0; a < 3; ++a) w.joints.at(f, j, a) = joints[j](a);
    }
  }
  return w;
}

// Upright torso in the z = 0 plane facing +z, i.e. towards camera 0:
// pelvis, left hip, right hip, left shoulder, right shoulder, hand.
std::vector<Vec3> body_with_hand(const Vec3& hand) {
  return {{0, 0, 0}, {0.1, 0, 0}, {-0.1, 0, 0}, {0.2, 0.45, 0}, {-0.2, 0.45, 0}, hand};
}

// Random torso-like body: jittered torso plus free limbs.
SkeletonWindow3D random_body(Gen& gen, std::size_t frames, std::size_t limbs) {
  SkeletonWindow3D w{Tensor(Shape{frames, 5 + limbs, 3})};
  for (std::size_t f = 0; f < frames; ++f) {
    const auto base = body_with_hand(Vec3::Zero());
    for (std::size_t j = 0; j < 5; ++j) {
      for (int a = 0; a < 3; ++a) w.joints.at(f, j, a) = base[j](a) + gen.uniform(-0.03, 0.03);
    }
    for (std::size_t j = 5; j < 5 + limbs; ++j) {
      w.joints.at(f, j, 0) = gen.uniform(-0.6, 0.6);
      w.joints.at(f, j, 1) = gen.uniform(-0.5, 1.0);
      w.joints.at(f, j, 2) = gen.uniform(-0.6, 0.6);
    }
  }
  return w;
}

TorsoPlane unit_square_plane() {
  return TorsoPlane::from_polygon(Vec3::Zero(), Vec3::UnitZ(),
                                  {{-0.5, -0.5, 0}, {0.5, -0.5, 0}, {0.5, 0.5, 0}, {-0.5, 0.5, 0}});
}

}  // namespace

TEST_CASE("rig: yaw placement") {
  const auto twelve = make_virtual_cameras({});
  REQUIRE(twelve.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(twelve[i].yaw_degrees() == doctest::Approx(30.0 * static_cast<double>(i)).epsilon(1e-12));
    CHECK(twelve[i].position.norm() == doctest::Approx(3.0));
    CHECK_NOTHROW(twelve[i].validate());
    // optical axis passes through the root
    CHECK(twelve[i].to_camera(Vec3::Zero()).head<2>().norm() < 1e-12);
  }
  const auto one = make_virtual_cameras({.views = 1});
  REQUIRE(one.size() == 1);
  CHECK(one[0].yaw_degrees() == 0.0);
  const auto three = make_virtual_cameras({.views = 3});
  CHECK(three[2].yaw_degrees() == doctest::Approx(60.0));
  CHECK_THROWS(make_virtual_cameras({.views = 0}));
  CHECK_THROWS(make_virtual_cameras({.spacing_deg = 0.0}));
}

TEST_CASE("projection: pinhole examples") {
  VirtualCamera cam;  // at the origin looking along +z
  auto proj = project_window(window_from({{0, 0, 5}}), cam);
  CHECK(proj.joints2d.at(0, 0, 0) == 0.0);
  CHECK(proj.joints2d.at(0, 0, 1) == 0.0);
  CHECK(proj.is_visible(0, 0));

  cam.focal = 2.0;
  proj = project_window(window_from({{1, 2, 4}}), cam);
  CHECK(proj.joints2d.at(0, 0, 0) == 0.5);
  CHECK(proj.joints2d.at(0, 0, 1) == 1.0);

  proj = project_window(window_from({{1, 1, -1}, {1, 1, 0}, {1, 1, 2}}), cam);
  CHECK_FALSE(proj.is_visible(0, 0));
  CHECK_FALSE(proj.is_visible(0, 1));
  CHECK(proj.joints2d.at(0, 0, 0) == 0.0);
  CHECK(proj.joints2d.at(0, 1, 1) == 0.0);
  CHECK(proj.visible_count() == 1);
}

TEST_CASE("torso plane: exact fits") {
  const std::array<Vec3, 4> square{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  const TorsoPlane p = fit_torso_plane(square);
  CHECK(std::abs(std::abs(p.normal.z()) - 1.0) < 1e-12);
  CHECK(p.normal.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.polygon.size() == 4);

  Gen gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 n = Vec3(gen.normal(), gen.normal(), gen.normal()).normalized();
    const Vec3 u = n.unitOrthogonal(), v = n.cross(u), o(gen.uniform(), gen.uniform(), gen.uniform());
    std::array<Vec3, 4> c{o + u, o + 2 * u + 0.3 * v, o + 1.5 * u + 1.2 * v, o + 0.2 * v};
    const TorsoPlane q = fit_torso_plane(c);
    for (const Vec3& x : c) CHECK(std::abs((x - q.anchor).dot(q.normal)) < 1e-12);
  }
}

TEST_CASE("torso plane: perturbed square against an SVD oracle") {
  for (double delta : {1e-3, 1e-2, 0.1}) {
    const std::array<Vec3, 4> c{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, delta)};
    Eigen::Matrix<double, 4, 3> m;
    Vec3 mean = Vec3::Zero();
    for (const auto& x : c) mean += x / 4.0;
    for (int i = 0; i < 4; ++i) m.row(i) = (c[i] - mean).transpose();
    Eigen::JacobiSVD<Eigen::Matrix<double, 4, 3>> svd(m, Eigen::ComputeFullV);
    const Vec3 oracle = svd.matrixV().col(2);
    const TorsoPlane p = fit_torso_plane(c);
    CHECK(std::abs(std::abs(p.normal.dot(oracle)) - 1.0) < 1e-12);
    CHECK(std::acos(std::min(1.0, std::abs(p.normal.z()))) < 2.0 * delta);
  }
}

TEST_CASE("torso plane: degenerate corners") {
  CHECK_THROWS_AS(fit_torso_plane({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)}), DegenerateTorso);
  CHECK_THROWS_AS(fit_torso_plane({Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)}), DegenerateTorso);
  SkeletonWindow3D w = window_from(body_with_hand({0, 0.2, 0.3}), 2);
  for (std::size_t j = 1; j < 5; ++j) {
    for (int a = 0; a < 3; ++a) w.joints.at(1, j, a) = 0.0;
  }
  const auto planes = fit_window_planes(w, {});
  CHECK_FALSE(planes[0].polygon.empty());
  CHECK(planes[1].polygon.empty());
}

TEST_CASE("occlusion: segment oracle examples") {
  const TorsoPlane plane = unit_square_plane();
  const Vec3 cam(0, 0, 5);
  CHECK(segment_hits_torso(plane, cam, {0, 0, -1}));
  CHECK_FALSE(segment_hits_torso(plane, cam, {0, 0, 2}));
  CHECK_FALSE(segment_hits_torso(plane, cam, {10, 0, -1}));  // crosses at x = 25/3
  // the crossing at x = 0.6 lies inside only once the polygon grows by 0.1
  const Vec3 off(0.72, 0, -1);
  CHECK_FALSE(segment_hits_torso(plane, cam, off));
  CHECK(segment_hits_torso(plane, cam, off, 0.15));
}

TEST_CASE("occlusion: mask application") {
  const SkeletonWindow3D w = window_from(body_with_hand({0, 0.2, -0.3}));
  VirtualCamera cam = look_at({0, 0.2, 3}, {0, 0.2, 0}, 1.0);
  ProjectedWindow pw = project_window(w, cam);
  CHECK(pw.visible_count() == 6);
  occlusion_mask(pw, w, cam, fit_window_planes(w, {}), {});
  CHECK_FALSE(pw.is_visible(0, 5));
  CHECK(pw.joints2d.at(0, 5, 0) == 0.0);
  CHECK(pw.joints2d.at(0, 5, 1) == 0.0);
  for (std::size_t j = 0; j < 5; ++j) CHECK(pw.is_visible(0, j));
}

TEST_CASE("render_views: arm in front of the chest is hidden from the opposite camera") {
  const SkeletonWindow3D w = window_from(body_with_hand({0, 0.2, 0.3}), 16);
  const auto views = render_views(w, make_virtual_cameras({}), {});
  REQUIRE(views.size() == 12);
  for (std::size_t v = 0; v < 12; ++v) {
    CHECK(views[v].view == v);
    CHECK(views[v].frames() == 16);
    CHECK(views[v].joint_count() == 6);
  }
  CHECK(views[0].is_visible(0, 5));
  CHECK_FALSE(views[6].is_visible(0, 5));
  const auto single = render_views(w, make_virtual_cameras({.views = 1}), {});
  CHECK(single.size() == 1);
}

TEST_CASE("properties on random bodies") {
  Gen gen(77);
  const auto cams = make_virtual_cameras({});
  const double step = 30.0 * std::numbers::pi / 180.0;
  for (int trial = 0; trial < 25; ++trial) {
    const SkeletonWindow3D w = random_body(gen, 3, 6);

    // circular symmetry: rotating the body by one spacing shifts the views by one
    SkeletonWindow3D rotated = w;
    const Mat3 r = yaw_rotation(step);
    for (std::size_t f = 0; f < w.frames(); ++f) {
      for (std::size_t j = 0; j < w.joint_count(); ++j) {
        const Vec3 p = r * w.joint(f, j);
        for (int a = 0; a < 3; ++a) rotated.joints.at(f, j, a) = p(a);
      }
    }
    const auto base = render_views(w, cams, {});
    const auto turned = render_views(rotated, cams, {});
    for (std::size_t v = 0; v + 1 < 12; ++v) {
      CHECK(max_abs_diff(base[v].joints2d, turned[v + 1].joints2d) < 1e-9);
      CHECK(base[v].visible == turned[v + 1].visible);
    }

    // margin monotonicity and torso joints never occluded
    const std::size_t v = gen.index(0, 11);
    const double m1 = gen.uniform(0.0, 0.1), m2 = m1 + gen.uniform(0.0, 0.2);
    const auto loose = render_views(w, {cams[v]}, {}, m1)[0];
    const auto tight = render_views(w, {cams[v]}, {}, m2)[0];
    for (std::size_t f = 0; f < w.frames(); ++f) {
      for (std::size_t j = 0; j < w.joint_count(); ++j) {
        if (!loose.is_visible(f, j)) CHECK_FALSE(tight.is_visible(f, j));
        if (j >= 1 && j <= 4) CHECK(tight.is_visible(f, j));
      }
    }

    // back-projection along the known ray
    VirtualCamera cam = cams[v];
    cam.focal = gen.uniform(0.5, 3.0);
    cam.principal = Vec2(gen.uniform(), gen.uniform());
    const ProjectedWindow pw = project_window(w, cam);
    for (std::size_t j = 0; j < w.joint_count(); ++j) {
      const Vec3 x = w.joint(0, j);
      const Vec2 uv(pw.joints2d.at(0, j, 0), pw.joints2d.at(0, j, 1));
      CHECK((back_project(cam, uv, cam.to_camera(x).z()) - x).norm() < 1e-9);
    }
  }
}

TEST_CASE("normalize_window: zero mean, unit RMS, invisible joints untouched") {
  Gen gen(8);
  const SkeletonWindow3D w = random_body(gen, 4, 6);
  const VirtualCamera cam = make_virtual_cameras({})[6];
  ProjectedWindow pw = render_views(w, {cam}, {})[0];
  pw.joints2d.at(0, 3, 0) += 4.0;  // torso joints are always visible
  const ProjectedWindow n = normalize_window(pw);
  Vec2 mean = Vec2::Zero();
  double ms = 0.0;
  const double count = static_cast<double>(pw.visible_count());
  for (std::size_t f = 0; f < n.frames(); ++f) {
    for (std::size_t j = 0; j < n.joint_count(); ++j) {
      const Vec2 p(n.joints2d.at(f, j, 0), n.joints2d.at(f, j, 1));
      if (!n.is_visible(f, j)) {
        CHECK(p.norm() == 0.0);
        continue;
      }
      mean += p / count;
      ms += p.squaredNorm() / count;
    }
  }
  CHECK(mean.norm() < 1e-12);
  CHECK(ms == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.visible == pw.visible);
}

TEST_CASE("center_on_root moves the first-frame root to the origin") {
  Gen gen(10);
  SkeletonWindow3D w = random_body(gen, 3, 2);
  w.joints.at(0, 0, 0) = 7.0;
  const SkeletonWindow3D c = center_on_root(w);
  CHECK(c.joint(0, 0).norm() < 1e-15);
  CHECK((c.joint(2, 3) - c.joint(2, 1) - (w.joint(2, 3) - w.joint(2, 1))).norm() < 1e-15);
}

TEST_CASE("rig files round trip") {
  const auto dir = testing::temp_dir("rig");
  const auto cams = make_virtual_cameras({.views = 5, .elevation_deg = 10.0});
  save_rig(dir / "rig.json", cams);
  const auto back = load_rig(dir / "rig.json");
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((back[i].rotation - cams[i].rotation).norm() < 1e-15);
    CHECK((back[i].position - cams[i].position).norm() < 1e-15);
    CHECK(back[i].focal == cams[i].focal);
  }
}
