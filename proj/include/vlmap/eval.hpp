#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vlmap/embedding_map.hpp"
#include "vlmap/metrics.hpp"
#include "vlmap/pipeline.hpp"
#include "vlmap/query.hpp"
#include "vlmap/synthetic.hpp"

namespace vlmap {

/// Per-pixel similarity image of a map heatmap seen from `camera_to_world`:
/// every point is splatted to its pixel, the nearest one wins. Pixels hit by
/// no point score 0.
Image<float> project_heatmap(const MapSnapshot& map, std::span<const float> similarity,
                             const Pose& camera_to_world, const Intrinsics& intr);

/// |A n B| / |A u B| of two ascending index sets; 1 when both are empty.
double iou(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

struct EvalOptions {
  std::optional<std::filesystem::path> scene;  // scene spec file; default scene otherwise
  std::uint64_t seed = 1;
  double sigma = 0.0;
  bool estimate_poses = false;  // odometry instead of ground-truth poses
  int auc_stride = 5;           // every n-th frame scored for PR AUC
  SegmentParams segment;
  RunConfig build;              // input/poses/segb/output paths are filled in
};

struct EvalReport {
  std::vector<std::pair<std::string, double>> iou;  // object classes
  std::vector<std::pair<std::string, double>> auc;  // per query, then "mean"
  std::optional<double> ate;                        // estimated trajectories only
  BuildResult build;
};

/// Writes the synthetic sequence to `out/data`, builds into `out/build` and
/// writes `iou.csv` and `auc.csv` (plus `ate.csv` when estimating poses).
EvalReport run_eval(const std::filesystem::path& out, const EvalOptions& options = {});

}  // namespace vlmap
