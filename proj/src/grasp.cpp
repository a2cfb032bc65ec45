#include "vlmap/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Geometry>

#include "vlmap/errors.hpp"

namespace vlmap {

Eigen::Matrix4d GraspPose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = orientation;
  m.topRightCorner<3, 1>() = position;
  return m;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& approach) {
  const Eigen::Vector3d helper =
      std::abs(approach.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d b1 = (helper - helper.dot(approach) * approach).normalized();
  return {b1, approach.cross(b1)};
}

GraspPose extract_grasp(std::span<const Eigen::Vector3d> points, const Eigen::Vector3d& approach,
                        double gripper_depth, const GraspParams& params) {
  if (points.size() < 3)
    throw GeometryError("insufficient_geometry",
                        "grasp needs at least 3 points, got " + std::to_string(points.size()));
  if (std::abs(approach.norm() - 1.0) > 1e-6) throw InputError("grasp approach must be a unit vector");
  if (!(gripper_depth > 0)) throw InputError("gripper depth must be positive");

  double top = std::numeric_limits<double>::infinity();
  for (const auto& p : points) top = std::min(top, approach.dot(p));

  const auto [b1, b2] = plane_basis(approach);
  std::vector<Eigen::Vector2d> plane;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) {
    if (approach.dot(p) - top > gripper_depth) continue;
    plane.emplace_back(b1.dot(p), b2.dot(p));
    centroid += p;
  }
  if (plane.size() < 3)
    throw GeometryError("insufficient_geometry", "fewer than 3 points within gripper depth");
  centroid /= static_cast<double>(plane.size());

  const int steps = static_cast<int>(std::lround(180.0 / params.step_deg));
  double best_extent = std::numeric_limits<double>::infinity();
  double widest = 0;
  Eigen::Vector2d best_dir = Eigen::Vector2d::UnitX();
  for (int s = 0; s < steps; ++s) {
    const double theta = s * params.step_deg * std::numbers::pi / 180.0;
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& q : plane) {
      const double t = dir.dot(q);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    const double extent = hi - lo;
    widest = std::max(widest, extent);
    // Rounding noise must not beat an earlier, equal extent.
    if (extent < best_extent - 1e-12) {
      best_extent = extent;
      best_dir = dir;
    }
  }
  if (widest < 1e-9)
    throw GeometryError("degenerate_geometry", "points are collinear along the approach direction");

  GraspPose g;
  const Eigen::Vector3d closing = (best_dir.x() * b1 + best_dir.y() * b2).normalized();
  g.orientation.col(0) = closing;
  g.orientation.col(1) = approach.cross(closing);
  g.orientation.col(2) = approach;
  g.position = centroid - approach.dot(centroid) * approach + (top + 0.5 * gripper_depth) * approach;
  g.min_extent = best_extent;
  g.width = best_extent + params.clearance;
  return g;
}

}  // namespace vlmap
