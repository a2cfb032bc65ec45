#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "vlmap/geometry.hpp"

namespace vlmap {

struct PyramidLevel {
  IntensityImage intensity;
  DepthImage depth;
};

/// Level 0 is full resolution; each further level halves both dimensions.
using Pyramid = std::vector<PyramidLevel>;

/// Intensity is (R + G + B) / 3 scaled to [0, 1]. Depth is box-averaged over
/// valid samples only. Throws InputError if the frame size is not divisible
/// by 2^(levels - 1).
Pyramid build_pyramid(const Frame& frame, int levels);

struct OdometryParams {
  int levels = 3;
  int max_iterations = 10;
  double convergence = 1e-6;        // twist update norm
  double photometric_weight = 0.1;  // lambda in r_geo + lambda * r_photo
  double huber_geometric = 0.05;    // metres
  double huber_photometric = 20.0 / 255.0;
  double max_association_distance = 0.1;  // metres, projective association gate
  int min_residuals = 100;
};

struct MotionEstimate {
  /// Pose of the current camera in the previous camera frame, i.e. maps
  /// current-frame points into the previous frame.
  Pose delta;
  /// Robust hybrid cost after each accepted iterate, per level, coarsest first.
  /// Entry 0 of each level is the cost at the level's initial pose.
  std::vector<std::vector<double>> cost_history;
  int finest_residuals = 0;
};

/// Coarse-to-fine Gauss-Newton on the 6-DoF twist minimising robust
/// point-to-plane plus weighted photometric residuals.
/// Throws TrackingLost if fewer than `min_residuals` residuals are valid at
/// the finest level.
MotionEstimate estimate_motion(const Pyramid& prev, const Pyramid& curr,
                               const Intrinsics& intr, const Pose& init,
                               const OdometryParams& params = {});

struct TimedPose {
  double timestamp = 0;
  Pose pose;
};

/// Map-frame camera poses ordered by timestamp.
struct Trajectory {
  std::vector<TimedPose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  void push_back(double timestamp, const Pose& pose) { poses.push_back({timestamp, pose}); }

  /// Pose whose timestamp is within `tolerance` seconds of `t`, if any.
  std::optional<Pose> lookup(double t, double tolerance = 0.01) const;
};

/// `timestamp tx ty tz qx qy qz qw` per line; blank lines and lines starting
/// with '#' are ignored.
Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);

/// Sequential frame-to-frame tracker. The first frame defines the map frame.
class Tracker {
 public:
  explicit Tracker(Intrinsics intr, OdometryParams params = {});

  /// Returns the map-frame pose of `frame`. On tracking loss the previous
  /// inter-frame motion is reapplied and `lost_count()` is incremented.
  Pose track(const Frame& frame);

  int lost_count() const { return lost_; }

 private:
  Intrinsics intr_;
  OdometryParams params_;
  std::optional<Pyramid> prev_;
  Pose pose_;
  Pose last_delta_;
  int lost_ = 0;
};

enum class TrackingMode { estimate, external };

/// Either estimates poses frame-to-frame, or returns the poses of
/// `external` verbatim. In external mode frames without a pose within 10 ms
/// are skipped and reported through `skipped` when provided.
Trajectory track(std::span<const Frame> frames, const Intrinsics& intr, TrackingMode mode,
                 const Trajectory* external = nullptr,
                 std::vector<long>* skipped = nullptr, const OdometryParams& params = {});

}  // namespace vlmap
