#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "vlmap/image.hpp"

namespace vlmap {

/// Pinhole camera model.
struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  /// Throws InputError when the invariants fx, fy > 0 and the principal point
  /// inside the image do not hold.
  void validate() const;

  /// Intrinsics of an image downsampled by 2^level with box averaging.
  Intrinsics scaled(int level) const;

  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
};

/// Reads `fx fy cx cy width height` from a one-line text file.
Intrinsics load_intrinsics(const std::filesystem::path& path);
void save_intrinsics(const std::filesystem::path& path, const Intrinsics& intr);

/// Rigid transform mapping points from a source frame into a target frame.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  static Pose from_isometry(const Eigen::Isometry3d& iso) {
    return {iso.linear(), iso.translation()};
  }
  Eigen::Isometry3d isometry() const {
    Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
    iso.linear() = rotation;
    iso.translation() = translation;
    return iso;
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Pose inverse() const {
    const Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  /// True when the rotation is orthonormal with determinant +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;

  /// Projects the rotation back onto SO(3) (SVD), removing accumulated drift.
  void orthonormalize();
};

/// Exponential map of a twist (v, w) onto SE(3).
Pose exp_se3(const Eigen::Matrix<double, 6, 1>& twist);

/// Rotation angle of the relative rotation between two poses, in radians.
double rotation_distance(const Pose& a, const Pose& b);

/// One RGB-D observation.
struct Frame {
  ColorImage color;
  DepthImage depth;
  double timestamp = 0;
  long index = 0;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
};

/// Back-projects each valid depth pixel through the inverse intrinsics.
/// Pixels with depth <= 0 (or non-finite) become invalid points.
PointImage back_project(const DepthImage& depth, const Intrinsics& intr);

/// Central-difference normals on a point image, oriented toward the camera.
/// Invalid when a neighbour is invalid or the cross product vanishes.
NormalImage estimate_normals(const PointImage& points);

std::vector<Eigen::Vector3d> transform_points(std::span<const Eigen::Vector3d> points,
                                              const Pose& pose);

}  // namespace vlmap
