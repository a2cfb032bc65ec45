#pragma once

#include <span>

#include <Eigen/Core>

namespace vlmap {

/// Parallel-gripper grasp. Orientation columns are the closing axis, the
/// transverse axis and the approach axis (right-handed).
struct GraspPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
  double width = 0;
  double min_extent = 0;  // projected extent along the closing axis, no clearance

  Eigen::Vector3d closing_axis() const { return orientation.col(0); }
  Eigen::Vector3d approach_axis() const { return orientation.col(2); }
  Eigen::Matrix4d matrix() const;
};

struct GraspParams {
  double clearance = 0.01;   // metres added to the minimal extent
  double step_deg = 1.0;     // in-plane rotation sweep resolution
};

/// Basis (b1, b2) of the plane orthogonal to `approach`; the sweep angle 0
/// points along b1.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const Eigen::Vector3d& approach);

/// Keeps the points within `gripper_depth` of the extremal point against the
/// approach direction, projects them onto the orthogonal plane and picks the
/// sweep direction of smallest extent (first minimum wins).
/// Throws GeometryError("insufficient_geometry") for fewer than 3 points and
/// GeometryError("degenerate_geometry") when the projection collapses.
GraspPose extract_grasp(std::span<const Eigen::Vector3d> points, const Eigen::Vector3d& approach,
                        double gripper_depth, const GraspParams& params = {});

}  // namespace vlmap
