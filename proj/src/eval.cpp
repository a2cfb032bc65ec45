#include "vlmap/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>

#include "vlmap/dataset.hpp"
#include "vlmap/errors.hpp"

namespace vlmap {

namespace fs = std::filesystem;

Image<float> project_heatmap(const MapSnapshot& map, std::span<const float> similarity,
                             const Pose& camera_to_world, const Intrinsics& intr) {
  if (similarity.size() != map.size()) throw InputError("similarity length does not match the map");
  Image<float> out(intr.width, intr.height, 0.0f);
  Image<double> zbuf(intr.width, intr.height, std::numeric_limits<double>::infinity());
  const Pose world_to_camera = camera_to_world.inverse();
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Eigen::Vector3d p = world_to_camera.rotation * map.position(i).cast<double>() +
                              world_to_camera.translation;
    if (p.z() <= 0) continue;
    const Eigen::Vector2d uv = intr.project(p);
    const int u = static_cast<int>(std::lround(uv.x()));
    const int v = static_cast<int>(std::lround(uv.y()));
    if (!out.contains(u, v) || p.z() >= zbuf(u, v)) continue;
    zbuf(u, v) = p.z();
    out(u, v) = similarity[i];
  }
  return out;
}

double iou(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  std::vector<std::uint32_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const std::size_t uni = a.size() + b.size() - common.size();
  return uni == 0 ? 1.0 : static_cast<double>(common.size()) / static_cast<double>(uni);
}

namespace {

void write_table(const fs::path& path, const char* header,
                 const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(9);
  out << header << '\n';
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

}  // namespace

EvalReport run_eval(const fs::path& out, const EvalOptions& options) {
  const SceneSpec spec = options.scene ? load_scene_spec(*options.scene) : default_scene_spec();
  const SyntheticScene scene = gen_scene(spec, options.seed);
  const fs::path data = out / "data";
  const std::vector<LabeledFrame> frames =
      write_synthetic_dataset(data, scene, {.sigma = options.sigma, .seed = options.seed, .write_poses = true});

  RunConfig cfg = options.build;
  cfg.input_dir = data;
  cfg.intrinsics.clear();
  cfg.segb_dir.clear();
  cfg.dim = spec.dim;
  cfg.fps = spec.fps;
  cfg.poses = options.estimate_poses ? std::nullopt : std::optional<fs::path>(data / "poses.txt");
  cfg.output_dir = out / "build";

  EvalReport report;
  report.build = run_build(cfg);
  const MapSnapshot map = report.build.map.snapshot();

  // Map points in world coordinates; estimated maps live in the first camera frame.
  Pose map_to_world = Pose::identity();
  if (options.estimate_poses && !scene.trajectory.empty()) map_to_world = scene.trajectory.poses.front().pose;
  std::vector<Eigen::Vector3d> world(map.size());
  for (std::size_t i = 0; i < map.size(); ++i)
    world[i] = map_to_world.rotation * map.position(i).cast<double>() + map_to_world.translation;

  const std::vector<QueryEmbedding> queries = synthetic_queries(scene);
  const std::vector<QueryEmbedding> task(queries.begin(), queries.end() - 1);
  const QueryEmbedding& object = queries.back();

  // 3D IoU of retained points per object class.
  std::map<int, std::vector<std::uint32_t>> truth;
  for (std::size_t i = 0; i < map.size(); ++i) truth[classify_point(scene, world[i])].push_back(static_cast<std::uint32_t>(i));
  const QueryResult seg = segment_3d(map, task, object, options.segment);
  for (const auto& obj : spec.objects) {
    const std::string label = "class" + std::to_string(obj.class_id);
    if (std::any_of(report.iou.begin(), report.iou.end(), [&](const auto& r) { return r.first == label; }))
      continue;
    const auto it = std::find_if(seg.sets.begin(), seg.sets.end(), [&](const QuerySet& s) { return s.label == label; });
    const std::vector<std::uint32_t> none;
    report.iou.emplace_back(label, iou(it == seg.sets.end() ? none : it->ids, truth.count(obj.class_id) ? truth[obj.class_id] : none));
  }

  // PR AUC of projected heatmaps against rendered labels.
  double auc_sum = 0;
  std::size_t auc_n = 0;
  for (const auto& q : task) {
    const int cls = std::stoi(q.label.substr(5));
    const std::vector<float> sim = heatmap(map, q);
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t f = 0; f < frames.size(); f += static_cast<std::size_t>(std::max(1, options.auc_stride))) {
      const Pose pose = scene.trajectory.poses[f].pose;
      Pose cam = pose;
      if (options.estimate_poses) cam = map_to_world.inverse() * pose;
      const Image<float> h = project_heatmap(map, sim, cam, spec.intr);
      std::vector<std::uint8_t> mask(h.pixels().size());
      const auto& labels = frames[f].labels.pixels();
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = labels[i] == cls;
      if (std::find(mask.begin(), mask.end(), 1) == mask.end()) continue;
      sum += pr_auc(h.pixels(), mask);
      ++n;
    }
    if (n == 0) continue;
    report.auc.emplace_back(q.label, sum / static_cast<double>(n));
    auc_sum += sum / static_cast<double>(n);
    ++auc_n;
  }
  report.auc.emplace_back("mean", auc_n ? auc_sum / static_cast<double>(auc_n) : 0.0);

  if (options.estimate_poses) report.ate = ate(report.build.trajectory, scene.trajectory);

  write_table(out / "iou.csv", "class,iou", report.iou);
  write_table(out / "auc.csv", "query,auc", report.auc);
  if (report.ate) write_table(out / "ate.csv", "metric,value", {{"ate_rmse_m", *report.ate}});
  return report;
}

}  // namespace vlmap
