#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vlmap/embedding_map.hpp"
#include "vlmap/geometry.hpp"
#include "vlmap/segments.hpp"

namespace vlmap {

struct FusionParams {
  double w_new = 0.2;
  double max_dist = 0.02;               // correspondence search radius, metres
  std::optional<double> insert_dist;    // defaults to the map voxel size
  /// c = (n . p_hat + 1) / 2 with p_hat pointing from the camera to the point.
  /// Off by default: head-on views then score 0 instead of 1.
  bool literal_confidence = false;
  /// Uses c(q) / (c(p) + c(q)) in the blend weight instead of c(p) / (...).
  bool swap_confidence_ratio = false;
};

/// Points of one frame that carry an embedding, in the map frame.
/// Entries reference their segment's embedding instead of copying it.
struct LiftedFrame {
  long frame_index = 0;
  std::uint32_t dim = 0;
  std::vector<Eigen::Vector3f> positions;
  std::vector<std::int32_t> segment;
  std::vector<float> confidences;
  std::vector<Rgb8> colors;
  std::vector<float> segment_embeddings;  // segments * dim

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  std::span<const float> embedding(std::size_t i) const {
    return {segment_embeddings.data() + static_cast<std::size_t>(segment[i]) * dim, dim};
  }
};

/// View-dependent confidence from a camera-facing unit normal and the
/// camera-frame point.
double view_confidence(const Eigen::Vector3d& normal, const Eigen::Vector3d& point,
                       bool literal_confidence = false);

/// Back-projects every pixel with valid depth, a valid normal and a segment
/// embedding, scores it and moves it into the map frame.
LiftedFrame lift(const Frame& frame, const PixelLookup& lookup, const Pose& pose,
                 const Intrinsics& intr, const FusionParams& params = {});

struct Correspondence {
  std::uint32_t map_id;
  std::uint32_t lifted_id;
};

/// For every map point, its nearest lifted point within `max_dist` (ties go to
/// the lower lifted index). Sorted by map id; many map points may share one
/// lifted point.
std::vector<Correspondence> correspond(const EmbeddingMap& map, const LiftedFrame& lifted,
                                       double max_dist);

/// Retention weight of the existing map value when blending in new data.
/// Falls back to 1 - 0.5 (1 - w_new) when both confidences vanish.
double blend_weight(double c_p, double c_q, double w_new, bool swap_ratio = false);

struct IntegrateStats {
  std::size_t blended = 0;
  std::size_t inserted = 0;
};

/// Blends corresponded lifted data into the map and inserts lifted points
/// whose nearest map point (before this call) is farther than `insert_dist`.
IntegrateStats integrate(EmbeddingMap& map, const LiftedFrame& lifted,
                         std::span<const Correspondence> corr, double w_new, double insert_dist,
                         bool swap_ratio = false);

/// Voxel-grid merge at the map voxel size, growing it by 1.25x until the map
/// fits its budget. Returns the number of merge passes performed.
int enforce_budget(EmbeddingMap& map);

}  // namespace vlmap
