#include <doctest.h>

#include <cmath>
#include <numbers>

#include "vlmap/errors.hpp"
#include "vlmap/geometry.hpp"

using namespace vlmap;

namespace {

DepthImage plane_depth(const Intrinsics& intr, const Eigen::Vector3d& n, double d) {
  // Depth of the plane n.x = d along each pixel ray (z = 1 direction).
  DepthImage depth(intr.width, intr.height);
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      const Eigen::Vector3d ray((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
      depth(u, v) = d / n.dot(ray);
    }
  return depth;
}

}  // namespace

TEST_CASE("back_project maps pixels through the pinhole model") {
  const Intrinsics unit{1, 1, 0, 0, 3, 3};
  DepthImage depth(3, 3, 0.0);
  depth(1, 1) = 2.0;
  const PointImage pts = back_project(depth, unit);
  CHECK(pts(1, 1).isApprox(Eigen::Vector3d(2, 2, 2)));
  CHECK_FALSE(is_valid(pts(0, 0)));

  const Intrinsics vga{500, 500, 320, 240, 640, 480};
  DepthImage d2(640, 480, 0.0);
  d2(320, 240) = 1.5;
  const PointImage p2 = back_project(d2, vga);
  CHECK(p2(320, 240).isApprox(Eigen::Vector3d(0, 0, 1.5)));
}

TEST_CASE("back_project rejects mismatched sizes") {
  const Intrinsics intr{1, 1, 0, 0, 4, 4};
  CHECK_THROWS_AS(back_project(DepthImage(3, 3, 1.0), intr), InputError);
}

TEST_CASE("normals of a frontal plane point at the camera") {
  const Intrinsics intr{100, 100, 15.5, 11.5, 32, 24};
  const NormalImage n = estimate_normals(back_project(plane_depth(intr, {0, 0, 1}, 1.0), intr));
  for (int v = 1; v < intr.height - 1; ++v)
    for (int u = 1; u < intr.width - 1; ++u) CHECK((n(u, v) - Eigen::Vector3d(0, 0, -1)).norm() < 1e-9);
}

TEST_CASE("normals of a tilted plane match the analytic normal") {
  const Intrinsics intr{120, 120, 19.5, 14.5, 40, 30};
  const Eigen::Vector3d normal = Eigen::Vector3d(std::sin(std::numbers::pi / 4), 0, std::cos(std::numbers::pi / 4));
  const NormalImage n = estimate_normals(back_project(plane_depth(intr, normal, 1.0), intr));
  int checked = 0;
  for (int v = 1; v < intr.height - 1; ++v)
    for (int u = 1; u < intr.width - 1; ++u) {
      REQUIRE(is_valid(n(u, v)));
      CHECK((n(u, v) + normal).norm() < 1e-6);  // flipped toward the camera
      ++checked;
    }
  CHECK(checked == 38 * 28);
}

TEST_CASE("normals next to invalid depth are invalid") {
  const Intrinsics intr{100, 100, 4.5, 4.5, 10, 10};
  DepthImage depth = plane_depth(intr, {0, 0, 1}, 1.0);
  depth(5, 5) = 0.0;
  const NormalImage n = estimate_normals(back_project(depth, intr));
  CHECK_FALSE(is_valid(n(4, 5)));
  CHECK_FALSE(is_valid(n(6, 5)));
  CHECK_FALSE(is_valid(n(5, 4)));
  CHECK_FALSE(is_valid(n(0, 0)));  // border
  CHECK(is_valid(n(2, 2)));
}

TEST_CASE("transform_points") {
  const std::vector<Eigen::Vector3d> origin{Eigen::Vector3d::Zero()};
  CHECK(transform_points(origin, Pose::identity())[0] == Eigen::Vector3d::Zero());
  Pose t;
  t.translation = {1, 2, 3};
  CHECK(transform_points(origin, t)[0] == Eigen::Vector3d(1, 2, 3));
  Pose yaw;
  yaw.rotation = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const std::vector<Eigen::Vector3d> x{Eigen::Vector3d::UnitX()};
  CHECK((transform_points(x, yaw)[0] - Eigen::Vector3d::UnitY()).norm() < 1e-12);
}

TEST_CASE("pose algebra") {
  Eigen::Matrix<double, 6, 1> xi;
  xi << 0.1, -0.2, 0.3, 0.05, -0.04, 0.3;
  const Pose p = exp_se3(xi);
  CHECK(p.is_valid());
  const Pose round = p * p.inverse();
  CHECK(round.rotation.isIdentity(1e-12));
  CHECK(round.translation.norm() < 1e-12);
  CHECK(rotation_distance(p, p) < 1e-9);
  CHECK(std::abs(rotation_distance(Pose::identity(), p) - xi.tail<3>().norm()) < 1e-12);

  Pose drifted = p;
  drifted.rotation(0, 1) += 1e-4;
  CHECK_FALSE(drifted.is_valid());
  drifted.orthonormalize();
  CHECK(drifted.is_valid());
}

TEST_CASE("intrinsics validation and scaling") {
  const Intrinsics good{200, 200, 159.5, 119.5, 320, 240};
  const Intrinsics zero_focal{0, 200, 159.5, 119.5, 320, 240};
  const Intrinsics outside{200, 200, 400, 119.5, 320, 240};
  CHECK_NOTHROW(good.validate());
  CHECK_THROWS_AS(zero_focal.validate(), InputError);
  CHECK_THROWS_AS(outside.validate(), InputError);
  const Intrinsics s = good.scaled(1);
  CHECK(s.fx == 100);
  CHECK(s.cx == doctest::Approx(79.5));
  CHECK(s.width == 160);
}
