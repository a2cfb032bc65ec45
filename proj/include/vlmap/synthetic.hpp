#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vlmap/geometry.hpp"
#include "vlmap/odometry.hpp"
#include "vlmap/query.hpp"
#include "vlmap/segments.hpp"

namespace vlmap {

enum class Shape { box, sphere };

struct SceneObject {
  Shape shape = Shape::box;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // box: full extents; sphere: radius in x
  double yaw_deg = 0;                              // rotation about world z
  int class_id = 1;
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.7);
};

/// Camera arc around `target` at fixed height, looking at the target.
struct ArcSpec {
  Eigen::Vector3d target{0, 0, 0.1};
  double radius = 1.2;
  double height = 0.8;
  double start_deg = -30;
  double end_deg = 30;
};

/// Parsed plain-text scene description (see README for the format).
struct SceneSpec {
  Intrinsics intr{200, 200, 159.5, 119.5, 320, 240};
  std::uint32_t dim = 16;
  int frames = 40;
  double fps = 30;
  int floor_class = 4;  // 0 disables floor labelling
  double floor_half_size = 2.0;
  Eigen::Vector3d floor_albedo{0.55, 0.55, 0.6};
  Eigen::Vector3d light{0.3, 0.4, 0.85};
  std::vector<SceneObject> objects;
  ArcSpec arc;
};

SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::filesystem::path& path);
/// Three objects (two boxes and a sphere) on a floor, viewed along an arc.
SceneSpec default_scene_spec();

struct SyntheticScene {
  SceneSpec spec;
  std::map<int, std::vector<float>> class_embeddings;  // class id -> unit vector
  Trajectory trajectory;                                // camera-to-world poses
};

/// Deterministic for (spec, seed). Class vectors are drawn uniformly on the
/// sphere with rejection until all pairwise |cos| <= 0.1.
/// Throws CapacityError after 10,000 rejected draws.
SyntheticScene gen_scene(const SceneSpec& spec, std::uint64_t seed);

/// Camera-to-world pose looking from `eye` at `target` with world z up.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

struct LabeledFrame {
  Frame frame;
  Image<std::int32_t> labels;  // class id, 0 = background
};

/// Ray-cast render: analytic intersections, Lambertian shading of a
/// procedural texture, nearest-hit class labels.
LabeledFrame render(const SyntheticScene& scene, const Pose& camera_to_world, const Intrinsics& intr);

/// One segment per 4-connected component of each non-zero class. Embedding is
/// the class vector plus Gaussian noise of expected norm sigma (variance
/// sigma^2 / dim per component), renormalised.
EmbeddingFrame synthetic_encode(const LabeledFrame& labeled, const SyntheticScene& scene,
                                double sigma = 0.0, std::uint64_t seed = 0);

/// Stand-in for the generic "object" text query: normalised mean of all
/// class vectors.
QueryEmbedding object_query(const SyntheticScene& scene);
/// Query whose vector equals the class vector of `class_id`.
QueryEmbedding class_query(const SyntheticScene& scene, int class_id);

/// Class of the surface nearest to `p` if within `tol`, else 0.
int classify_point(const SyntheticScene& scene, const Eigen::Vector3d& p, double tol = 0.01);

}  // namespace vlmap
