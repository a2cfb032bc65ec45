// Slow, obviously-correct reference implementations the tests compare against.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

namespace oracle {

inline double dist2(const Eigen::Vector3f& a, const Eigen::Vector3f& b) {
  const double dx = double(a.x()) - b.x(), dy = double(a.y()) - b.y(), dz = double(a.z()) - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Pair {
  std::uint32_t map_id, lifted_id;
  bool operator==(const Pair&) const = default;
};

/// Every map point paired with its nearest lifted point within r, lower
/// lifted index on ties.
inline std::vector<Pair> correspond(const std::vector<Eigen::Vector3f>& map,
                                    const std::vector<Eigen::Vector3f>& lifted, double r) {
  std::vector<Pair> out;
  for (std::size_t i = 0; i < map.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    long arg = -1;
    for (std::size_t j = 0; j < lifted.size(); ++j) {
      const double d = dist2(map[i], lifted[j]);
      if (d <= r * r && d < best) {
        best = d;
        arg = static_cast<long>(j);
      }
    }
    if (arg >= 0) out.push_back({std::uint32_t(i), std::uint32_t(arg)});
  }
  return out;
}

/// Textbook DBSCAN: O(n^2) neighbourhoods, clusters grown in index order.
inline std::vector<int> dbscan(const std::vector<Eigen::Vector3f>& pts, double eps, std::size_t min_pts,
                               std::vector<char>* core_out = nullptr) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist2(pts[i], pts[j]) <= eps * eps) nb[i].push_back(j);
  std::vector<char> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= min_pts;
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] >= 0) continue;
    std::vector<std::size_t> queue{i};
    label[i] = next;
    for (std::size_t h = 0; h < queue.size(); ++h)
      for (auto q : nb[queue[h]])
        if (label[q] < 0) {
          label[q] = next;
          if (core[q]) queue.push_back(q);
        }
    ++next;
  }
  if (core_out) *core_out = core;
  return label;
}

/// PR AUC recomputed from scratch at each of the 256 thresholds.
inline double pr_auc(const std::vector<float>& s, const std::vector<std::uint8_t>& gt) {
  std::vector<std::pair<double, double>> pts;  // (recall, precision), threshold descending
  double positives = 0;
  for (auto g : gt) positives += g;
  for (int j = 255; j >= 0; --j) {
    const double t = j / 255.0;
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (double(s[i]) >= t) (gt[i] ? tp : fp) += 1;
    if (tp + fp == 0) continue;
    pts.emplace_back(tp / positives, tp / (tp + fp));
  }
  if (pts.empty()) return 0;
  std::vector<std::pair<double, double>> curve;
  curve.emplace_back(0.0, pts.front().second);
  curve.insert(curve.end(), pts.begin(), pts.end());
  curve.emplace_back(1.0, pts.back().second);
  double area = 0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    area += (curve[k].first - curve[k - 1].first) * (curve[k].second + curve[k - 1].second) / 2;
  return area;
}

/// RMSE after a Kabsch alignment of `est` onto `gt` (paired by index).
inline double ate(const std::vector<Eigen::Vector3d>& est, const std::vector<Eigen::Vector3d>& gt) {
  const std::size_t n = est.size();
  Eigen::Vector3d me = Eigen::Vector3d::Zero(), mg = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    me += est[i];
    mg += gt[i];
  }
  me /= double(n);
  mg /= double(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) h += (est[i] - me) * (gt[i] - mg).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1 : 1;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  double sq = 0;
  for (std::size_t i = 0; i < n; ++i) sq += (r * (est[i] - me) + mg - gt[i]).squaredNorm();
  return std::sqrt(sq / double(n));
}

/// Minimal-width direction by exhaustive search at `step_deg` over [0, 180).
inline std::pair<double, double> grasp_sweep(const std::vector<Eigen::Vector2d>& pts, double step_deg) {
  double best = std::numeric_limits<double>::infinity(), best_theta = 0;
  for (int k = 0; k * step_deg < 180.0; ++k) {
    const double th = k * step_deg * std::numbers::pi / 180;
    const Eigen::Vector2d d(std::cos(th), std::sin(th));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : pts) {
      lo = std::min(lo, p.dot(d));
      hi = std::max(hi, p.dot(d));
    }
    if (hi - lo < best) {
      best = hi - lo;
      best_theta = th;
    }
  }
  return {best, best_theta};
}

/// Independent PLY reader: vertex x y z (float) red green blue (uchar).
struct PlyVertex {
  float x, y, z;
  int r, g, b;
};

inline std::vector<PlyVertex> read_ply(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string line, format;
  std::size_t count = 0;
  std::vector<std::string> props;
  if (!std::getline(in, line) || line != "ply") throw std::runtime_error("not a ply file");
  while (std::getline(in, line)) {
    std::istringstream l(line);
    std::string w;
    l >> w;
    if (w == "format") l >> format;
    if (w == "element") {
      std::string name;
      l >> name >> count;
    }
    if (w == "property") {
      std::string type, name;
      l >> type >> name;
      props.push_back(type + " " + name);
    }
    if (w == "end_header") break;
  }
  const std::vector<std::string> expected{"float x",     "float y",     "float z",
                                          "uchar red", "uchar green", "uchar blue"};
  if (props != expected) throw std::runtime_error("unexpected properties");
  std::vector<PlyVertex> out(count);
  if (format == "ascii") {
    for (auto& v : out)
      if (!(in >> v.x >> v.y >> v.z >> v.r >> v.g >> v.b)) throw std::runtime_error("short ascii body");
    std::string rest;
    if (in >> rest) throw std::runtime_error("trailing ascii data");
  } else if (format == "binary_little_endian") {
    const std::size_t body = std::size_t(in.tellg());
    if (bytes.size() - body != count * 15) throw std::runtime_error("binary body size mismatch");
    const char* p = bytes.data() + body;
    for (auto& v : out) {
      std::memcpy(&v.x, p, 4);
      std::memcpy(&v.y, p + 4, 4);
      std::memcpy(&v.z, p + 8, 4);
      v.r = static_cast<unsigned char>(p[12]);
      v.g = static_cast<unsigned char>(p[13]);
      v.b = static_cast<unsigned char>(p[14]);
      p += 15;
    }
  } else {
    throw std::runtime_error("unknown format " + format);
  }
  return out;
}

}  // namespace oracle
