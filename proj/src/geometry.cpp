#include "vlmap/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/SVD>

#include "vlmap/errors.hpp"

namespace vlmap {

void Intrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw InputError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("intrinsics: image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw InputError("intrinsics: principal point outside image");
}

Intrinsics Intrinsics::scaled(int level) const {
  // Box downsampling by 2 maps pixel centre u to (u - 0.5) / 2.
  Intrinsics out = *this;
  for (int i = 0; i < level; ++i) {
    out.fx *= 0.5;
    out.fy *= 0.5;
    out.cx = (out.cx - 0.5) * 0.5;
    out.cy = (out.cy - 0.5) * 0.5;
    out.width /= 2;
    out.height /= 2;
  }
  return out;
}

Intrinsics load_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open intrinsics file " + path.string());
  Intrinsics intr;
  double w = 0, h = 0;
  if (!(in >> intr.fx >> intr.fy >> intr.cx >> intr.cy >> w >> h))
    throw FormatError("intrinsics file " + path.string() + " needs 'fx fy cx cy width height'", 0);
  intr.width = static_cast<int>(w);
  intr.height = static_cast<int>(h);
  intr.validate();
  return intr;
}

void save_intrinsics(const std::filesystem::path& path, const Intrinsics& intr) {
  std::ofstream out(path);
  out.precision(17);
  out << intr.fx << ' ' << intr.fy << ' ' << intr.cx << ' ' << intr.cy << ' ' << intr.width
      << ' ' << intr.height << '\n';
  if (!out) throw InputError("cannot write " + path.string());
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

void Pose::orthonormalize() {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1;
    r = u * svd.matrixV().transpose();
  }
  rotation = r;
}

Pose exp_se3(const Eigen::Matrix<double, 6, 1>& twist) {
  const Eigen::Vector3d v = twist.head<3>();
  const Eigen::Vector3d w = twist.tail<3>();
  const double theta = w.norm();
  Eigen::Matrix3d wx;
  wx << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  Eigen::Matrix3d r, jl;
  if (theta < 1e-10) {
    r = Eigen::Matrix3d::Identity() + wx;
    jl = Eigen::Matrix3d::Identity() + 0.5 * wx;
  } else {
    const double a = std::sin(theta) / theta;
    const double b = (1 - std::cos(theta)) / (theta * theta);
    const double c = (1 - a) / (theta * theta);
    r = Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
    jl = Eigen::Matrix3d::Identity() + b * wx + c * wx * wx;
  }
  Pose out{r, jl * v};
  out.orthonormalize();
  return out;
}

double rotation_distance(const Pose& a, const Pose& b) {
  const Eigen::Matrix3d rel = a.rotation.transpose() * b.rotation;
  return Eigen::AngleAxisd(rel).angle();
}

PointImage back_project(const DepthImage& depth, const Intrinsics& intr) {
  if (depth.width() != intr.width || depth.height() != intr.height)
    throw InputError("back_project: depth is " + std::to_string(depth.width()) + "x" +
                     std::to_string(depth.height()) + ", intrinsics expect " +
                     std::to_string(intr.width) + "x" + std::to_string(intr.height));
  PointImage points(depth.width(), depth.height(), invalid_point());
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth(u, v);
      if (!(d > 0) || !std::isfinite(d)) continue;
      points(u, v) = {(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d};
    }
  }
  return points;
}

NormalImage estimate_normals(const PointImage& points) {
  const int w = points.width();
  const int h = points.height();
  NormalImage normals(w, h, invalid_point());
  for (int v = 1; v + 1 < h; ++v) {
    for (int u = 1; u + 1 < w; ++u) {
      const auto& p = points(u, v);
      const auto& right = points(u + 1, v);
      const auto& left = points(u - 1, v);
      const auto& down = points(u, v + 1);
      const auto& up = points(u, v - 1);
      if (!is_valid(p) || !is_valid(right) || !is_valid(left) || !is_valid(down) ||
          !is_valid(up))
        continue;
      Eigen::Vector3d n = (right - left).cross(down - up);
      const double norm = n.norm();
      if (norm < 1e-12) continue;
      n /= norm;
      if (n.dot(p) > 0) n = -n;
      normals(u, v) = n;
    }
  }
  return normals;
}

std::vector<Eigen::Vector3d> transform_points(std::span<const Eigen::Vector3d> points,
                                              const Pose& pose) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose * p);
  return out;
}

}  // namespace vlmap
