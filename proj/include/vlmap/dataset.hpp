#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vlmap/geometry.hpp"
#include "vlmap/synthetic.hpp"

namespace vlmap {

/// Recorded sequence layout:
///   color/<i:06>.png  8-bit RGB      depth/<i:06>.png  16-bit millimetres
///   segb/<i:06>.segb                 intrinsics.txt
///   poses.txt (optional)             timestamps.txt (optional, `index seconds`)
/// Without timestamps.txt frame i is stamped i / 30 s.
std::string frame_name(long index, const std::string& ext);

/// Frame indices present in `root/color`, ascending.
std::vector<long> list_frames(const std::filesystem::path& root);

/// Per-index timestamps from `root/timestamps.txt`, or i / fps.
double frame_timestamp(const std::filesystem::path& root, long index, double fps = 30.0);

class TimestampTable {
 public:
  explicit TimestampTable(const std::filesystem::path& root, double fps = 30.0);
  double at(long index) const;

 private:
  std::vector<std::pair<long, double>> table_;
  double fps_;
};

Frame load_frame(const std::filesystem::path& root, long index, double timestamp);
void save_frame(const std::filesystem::path& root, const Frame& frame);

ColorImage read_color_png(const std::filesystem::path& path);
DepthImage read_depth_png(const std::filesystem::path& path);
void write_color_png(const std::filesystem::path& path, const ColorImage& img);
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);

struct SyntheticDatasetOptions {
  double sigma = 0.0;          // embedding noise
  std::uint64_t seed = 7;
  bool write_poses = true;     // ground-truth poses.txt
};

/// Renders every trajectory pose of `scene` and writes a complete sequence
/// plus `queries.txtq` (one entry per class, then "object") and
/// `gt_trajectory.txt`. Returns the rendered frames.
std::vector<LabeledFrame> write_synthetic_dataset(const std::filesystem::path& root,
                                                  const SyntheticScene& scene,
                                                  const SyntheticDatasetOptions& options = {});

/// Renders all frames of the scene trajectory in memory (frame index and
/// timestamp filled in).
std::vector<LabeledFrame> render_sequence(const SyntheticScene& scene);

/// Task queries named `class<k>` for every object class plus the floor, then
/// the generic "object" entry.
std::vector<QueryEmbedding> synthetic_queries(const SyntheticScene& scene);

}  // namespace vlmap
