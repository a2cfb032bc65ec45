#include "vlmap/odometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Cholesky>

#include "vlmap/errors.hpp"

namespace vlmap {

namespace {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

IntensityImage to_intensity(const ColorImage& color) {
  IntensityImage out(color.width(), color.height());
  for (int v = 0; v < color.height(); ++v)
    for (int u = 0; u < color.width(); ++u) {
      const Rgb8& c = color(u, v);
      out(u, v) = (float(c[0]) + float(c[1]) + float(c[2])) / (3.0f * 255.0f);
    }
  return out;
}

PyramidLevel downsample(const PyramidLevel& fine) {
  const int w = fine.depth.width() / 2;
  const int h = fine.depth.height() / 2;
  PyramidLevel coarse{IntensityImage(w, h), DepthImage(w, h)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      float isum = 0;
      double dsum = 0;
      int dcount = 0;
      for (int dv = 0; dv < 2; ++dv)
        for (int du = 0; du < 2; ++du) {
          isum += fine.intensity(2 * u + du, 2 * v + dv);
          const double d = fine.depth(2 * u + du, 2 * v + dv);
          if (d > 0) {
            dsum += d;
            ++dcount;
          }
        }
      coarse.intensity(u, v) = isum * 0.25f;
      coarse.depth(u, v) = dcount > 0 ? dsum / dcount : 0.0;
    }
  }
  return coarse;
}

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

float bilinear(const IntensityImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  return static_cast<float>((1 - ay) * ((1 - ax) * img(x0, y0) + ax * img(x0 + 1, y0)) +
                            ay * ((1 - ax) * img(x0, y0 + 1) + ax * img(x0 + 1, y0 + 1)));
}

struct Sample {
  Eigen::Vector3d point;
  float intensity;
};

/// Previous-frame data for one pyramid level plus the current-frame samples.
struct LevelProblem {
  Intrinsics intr;
  PointImage points;
  NormalImage normals;
  IntensityImage intensity, grad_x, grad_y;
  std::vector<Sample> samples;
};

LevelProblem prepare_level(const PyramidLevel& prev, const PyramidLevel& curr,
                           const Intrinsics& intr) {
  LevelProblem lp;
  lp.intr = intr;
  lp.points = back_project(prev.depth, intr);
  lp.normals = estimate_normals(lp.points);
  lp.intensity = prev.intensity;
  const int w = prev.intensity.width();
  const int h = prev.intensity.height();
  lp.grad_x = IntensityImage(w, h);
  lp.grad_y = IntensityImage(w, h);
  for (int v = 1; v + 1 < h; ++v)
    for (int u = 1; u + 1 < w; ++u) {
      lp.grad_x(u, v) = 0.5f * (prev.intensity(u + 1, v) - prev.intensity(u - 1, v));
      lp.grad_y(u, v) = 0.5f * (prev.intensity(u, v + 1) - prev.intensity(u, v - 1));
    }
  const PointImage curr_points = back_project(curr.depth, intr);
  lp.samples.reserve(curr_points.size());
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (is_valid(curr_points(u, v)))
        lp.samples.push_back({curr_points(u, v), curr.intensity(u, v)});
  return lp;
}

struct Linearization {
  double cost = 0;
  int residuals = 0;
  Matrix6d hessian = Matrix6d::Zero();
  Vector6d gradient = Vector6d::Zero();
};

/// Evaluates the robust hybrid cost at `pose`; with `linearize` also builds
/// the IRLS normal equations (weights taken from the residuals at `pose`).
Linearization evaluate(const LevelProblem& lp, const Pose& pose, const OdometryParams& params,
                       bool linearize) {
  Linearization out;
  const int w = lp.intensity.width();
  const int h = lp.intensity.height();
  const double lambda = params.photometric_weight;
  for (const Sample& s : lp.samples) {
    const Eigen::Vector3d x = pose * s.point;
    if (x.z() <= 0) continue;
    const double pu = lp.intr.fx * x.x() / x.z() + lp.intr.cx;
    const double pv = lp.intr.fy * x.y() / x.z() + lp.intr.cy;
    if (!(pu >= 1 && pv >= 1 && pu < w - 2 && pv < h - 2)) continue;
    const int nu = static_cast<int>(std::lround(pu));
    const int nv = static_cast<int>(std::lround(pv));
    const Eigen::Vector3d& q = lp.points(nu, nv);
    const Eigen::Vector3d& n = lp.normals(nu, nv);
    if (!is_valid(q) || !is_valid(n)) continue;
    if ((x - q).norm() > params.max_association_distance) continue;

    const double r_geo = n.dot(x - q);
    const double r_photo = bilinear(lp.intensity, pu, pv) - s.intensity;
    out.cost += huber(r_geo, params.huber_geometric) +
                lambda * huber(r_photo, params.huber_photometric);
    ++out.residuals;
    if (!linearize) continue;

    Vector6d j_geo;
    j_geo << n, x.cross(n);
    const double gx = bilinear(lp.grad_x, pu, pv);
    const double gy = bilinear(lp.grad_y, pu, pv);
    const double iz = 1.0 / x.z();
    const Eigen::Vector3d dr_dx(gx * lp.intr.fx * iz, gy * lp.intr.fy * iz,
                                -(gx * lp.intr.fx * x.x() + gy * lp.intr.fy * x.y()) * iz * iz);
    Vector6d j_photo;
    j_photo << dr_dx, x.cross(dr_dx);

    const double wg = huber_weight(r_geo, params.huber_geometric);
    const double wp = lambda * huber_weight(r_photo, params.huber_photometric);
    out.hessian.noalias() += wg * j_geo * j_geo.transpose() + wp * j_photo * j_photo.transpose();
    out.gradient.noalias() += wg * r_geo * j_geo + wp * r_photo * j_photo;
  }
  return out;
}

}  // namespace

Pyramid build_pyramid(const Frame& frame, int levels) {
  if (levels < 1) throw InputError("build_pyramid: levels must be >= 1");
  const int div = 1 << (levels - 1);
  if (frame.width() % div != 0 || frame.height() % div != 0)
    throw InputError("build_pyramid: " + std::to_string(frame.width()) + "x" +
                     std::to_string(frame.height()) + " not divisible by " + std::to_string(div));
  if (frame.color.width() != frame.width() || frame.color.height() != frame.height())
    throw InputError("build_pyramid: colour and depth dimensions differ");
  Pyramid pyr;
  pyr.reserve(levels);
  pyr.push_back({to_intensity(frame.color), frame.depth});
  for (int l = 1; l < levels; ++l) pyr.push_back(downsample(pyr.back()));
  return pyr;
}

MotionEstimate estimate_motion(const Pyramid& prev, const Pyramid& curr, const Intrinsics& intr,
                               const Pose& init, const OdometryParams& params) {
  if (prev.size() != curr.size() || prev.empty())
    throw InputError("estimate_motion: pyramids differ in depth");
  for (std::size_t l = 0; l < prev.size(); ++l)
    if (prev[l].depth.width() != curr[l].depth.width() ||
        prev[l].depth.height() != curr[l].depth.height())
      throw InputError("estimate_motion: pyramid level sizes differ");

  MotionEstimate est;
  Pose pose = init;
  for (int level = static_cast<int>(prev.size()) - 1; level >= 0; --level) {
    const LevelProblem lp = prepare_level(prev[level], curr[level], intr.scaled(level));
    std::vector<double> history;
    for (int it = 0; it < params.max_iterations; ++it) {
      const Linearization lin = evaluate(lp, pose, params, true);
      if (history.empty()) history.push_back(lin.cost);
      if (lin.residuals < 6) break;
      Matrix6d hessian = lin.hessian;
      hessian.diagonal().array() += 1e-9 * (1.0 + hessian.diagonal().array());
      Vector6d step = -hessian.ldlt().solve(lin.gradient);
      if (!step.allFinite()) break;
      // Backtrack until the robust cost does not increase.
      bool accepted = false;
      Pose candidate;
      double candidate_cost = lin.cost;
      for (int halvings = 0; halvings < 6 && !accepted; ++halvings) {
        candidate = exp_se3(step) * pose;
        candidate_cost = evaluate(lp, candidate, params, false).cost;
        if (candidate_cost <= lin.cost) accepted = true;
        else step *= 0.5;
      }
      if (!accepted) break;
      pose = candidate;
      pose.orthonormalize();
      history.push_back(candidate_cost);
      if (step.norm() < params.convergence) break;
    }
    est.cost_history.push_back(std::move(history));
    if (level == 0) est.finest_residuals = evaluate(lp, pose, params, false).residuals;
  }
  if (est.finest_residuals < params.min_residuals)
    throw TrackingLost("only " + std::to_string(est.finest_residuals) +
                       " valid residuals at the finest level");
  est.delta = pose;
  return est;
}

std::optional<Pose> Trajectory::lookup(double t, double tolerance) const {
  const TimedPose* best = nullptr;
  for (const auto& tp : poses)
    if (std::abs(tp.timestamp - t) <= tolerance &&
        (!best || std::abs(tp.timestamp - t) < std::abs(best->timestamp - t)))
      best = &tp;
  if (!best) return std::nullopt;
  return best->pose;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pose file " + path.string());
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                            ": expected 'timestamp tx ty tz qx qy qz qw'",
                        0);
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-9) throw DataError(path.string() + ":" + std::to_string(lineno) + ": zero quaternion");
    q.normalize();
    if (!traj.empty() && t <= traj.poses.back().timestamp)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": timestamps must be strictly increasing");
    traj.push_back(t, Pose{q.toRotationMatrix(), {tx, ty, tz}});
  }
  return traj;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << std::setprecision(9) << std::fixed;
  for (const auto& tp : traj.poses) {
    const Eigen::Quaterniond q(tp.pose.rotation);
    const auto& t = tp.pose.translation;
    out << tp.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' '
        << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

Tracker::Tracker(Intrinsics intr, OdometryParams params)
    : intr_(std::move(intr)), params_(std::move(params)) {}

Pose Tracker::track(const Frame& frame) {
  Pyramid pyr = build_pyramid(frame, params_.levels);
  if (prev_) {
    Pose delta;
    try {
      delta = estimate_motion(*prev_, pyr, intr_, last_delta_, params_).delta;
    } catch (const TrackingLost&) {
      ++lost_;
      delta = last_delta_;
    }
    pose_ = pose_ * delta;
    pose_.orthonormalize();
    last_delta_ = delta;
  }
  prev_ = std::move(pyr);
  return pose_;
}

Trajectory track(std::span<const Frame> frames, const Intrinsics& intr, TrackingMode mode,
                 const Trajectory* external, std::vector<long>* skipped,
                 const OdometryParams& params) {
  Trajectory traj;
  if (mode == TrackingMode::external) {
    if (!external) throw InputError("track: external mode needs a pose file");
    for (const Frame& f : frames) {
      if (auto pose = external->lookup(f.timestamp)) traj.push_back(f.timestamp, *pose);
      else if (skipped) skipped->push_back(f.index);
    }
    return traj;
  }
  Tracker tracker(intr, params);
  for (const Frame& f : frames) traj.push_back(f.timestamp, tracker.track(f));
  return traj;
}

}  // namespace vlmap
