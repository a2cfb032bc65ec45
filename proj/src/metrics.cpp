#include "vlmap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "vlmap/errors.hpp"

namespace vlmap {

double pr_auc(std::span<const float> similarity, std::span<const std::uint8_t> gt_mask) {
  if (similarity.size() != gt_mask.size())
    throw InputError("pr_auc: similarity has " + std::to_string(similarity.size()) + " pixels, mask " +
                     std::to_string(gt_mask.size()));
  std::vector<float> pos, neg;
  for (std::size_t i = 0; i < similarity.size(); ++i) (gt_mask[i] ? pos : neg).push_back(similarity[i]);
  if (pos.empty()) throw InputError("pr_auc: ground truth has no positive pixel");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto at_least = [](const std::vector<float>& v, double t) {
    const auto it = std::lower_bound(v.begin(), v.end(), t, [](float s, double th) { return s < th; });
    return static_cast<double>(v.end() - it);
  };

  struct PrPoint {
    double recall, precision;
  };
  std::vector<PrPoint> curve;  // ordered by decreasing threshold
  for (int j = 255; j >= 0; --j) {
    const double t = j / 255.0;
    const double tp = at_least(pos, t);
    const double fp = at_least(neg, t);
    if (tp + fp == 0) continue;
    curve.push_back({tp / pos.size(), tp / (tp + fp)});
  }
  // Threshold 0 predicts everything, so the curve is never empty.
  const double p_top = curve.front().precision;
  const double p_zero = curve.back().precision;
  curve.insert(curve.begin(), {0.0, p_top});
  curve.push_back({1.0, p_zero});
  double auc = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    auc += (curve[i].recall - curve[i - 1].recall) * 0.5 * (curve[i].precision + curve[i - 1].precision);
  return auc;
}

double ate(const Trajectory& est, const Trajectory& gt) {
  std::vector<Eigen::Vector3d> src, dst;
  for (const auto& tp : est.poses)
    if (auto g = gt.lookup(tp.timestamp)) {
      src.push_back(tp.pose.translation);
      dst.push_back(g->translation);
    }
  if (src.size() < 2) throw InputError("ate: need at least 2 matched poses, got " + std::to_string(src.size()));
  Eigen::Matrix3Xd a(3, src.size()), b(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    a.col(i) = src[i];
    b.col(i) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, false);
  const Eigen::Matrix3Xd aligned = (t.topLeftCorner<3, 3>() * a).colwise() + t.topRightCorner<3, 1>();
  return std::sqrt((aligned - b).colwise().squaredNorm().mean());
}

StageReport StageTimer::report() const {
  StageReport r;
  const double n = frames_ > 0 ? static_cast<double>(frames_) : 1.0;
  for (std::size_t s = 0; s < kStageNames.size(); ++s)
    r.stages.push_back({kStageNames[s], frames_ > 0 ? totals_[s] / n : 0.0});
  r.frames = frames_;
  r.dropped = dropped_;
  r.end_to_end_mean_s = frames_ > 0 ? end_to_end_ / n : 0.0;
  if (wall_ > 0)
    r.hz = static_cast<double>(frames_) / wall_;
  else
    r.hz = r.end_to_end_mean_s > 0 ? 1.0 / r.end_to_end_mean_s : 0.0;
  return r;
}

std::string StageReport::csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "stage,mean_s\n";
  for (const auto& row : stages) out << row.stage << ',' << row.mean_s << '\n';
  out << "end_to_end," << end_to_end_mean_s << '\n';
  out << "hz," << hz << '\n';
  out << "dropped_frames," << dropped << '\n';
  return out.str();
}

void write_auc_csv(const std::filesystem::path& path, std::span<const std::pair<std::string, double>> rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(9);
  out << "query,auc\n";
  for (const auto& [q, auc] : rows) out << q << ',' << auc << '\n';
}

}  // namespace vlmap
