#include "vlmap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vlmap/errors.hpp"
#include "vlmap/segments.hpp"

namespace fs = std::filesystem;

namespace vlmap {

std::string frame_name(long index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06ld", index);
  return std::string(buf) + "." + ext;
}

std::vector<long> list_frames(const fs::path& root) {
  std::vector<long> out;
  const fs::path dir = root / "color";
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || stem.find_first_not_of("0123456789") != std::string::npos) continue;
    out.push_back(std::stol(stem));
  }
  std::sort(out.begin(), out.end());
  return out;
}

TimestampTable::TimestampTable(const fs::path& root, double fps) : fps_(fps) {
  std::ifstream in(root / "timestamps.txt");
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    long i;
    double t;
    if (ss >> i >> t) table_.emplace_back(i, t);
  }
  std::sort(table_.begin(), table_.end());
}

double TimestampTable::at(long index) const {
  const auto it = std::lower_bound(table_.begin(), table_.end(), std::pair<long, double>(index, -1e300));
  if (it != table_.end() && it->first == index) return it->second;
  return index / fps_;
}

double frame_timestamp(const fs::path& root, long index, double fps) {
  return TimestampTable(root, fps).at(index);
}

ColorImage read_color_png(const fs::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("cannot read colour image " + path.string());
  ColorImage img(bgr.cols, bgr.rows);
  for (int v = 0; v < bgr.rows; ++v)
    for (int u = 0; u < bgr.cols; ++u) {
      const auto& p = bgr.at<cv::Vec3b>(v, u);
      img(u, v) = Rgb8(p[2], p[1], p[0]);
    }
  return img;
}

DepthImage read_depth_png(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw InputError("cannot read depth image " + path.string());
  if (raw.type() != CV_16UC1) throw DataError("depth image " + path.string() + " is not 16-bit single channel");
  DepthImage depth(raw.cols, raw.rows);
  for (int v = 0; v < raw.rows; ++v)
    for (int u = 0; u < raw.cols; ++u) depth(u, v) = raw.at<std::uint16_t>(v, u) * 1e-3;
  return depth;
}

void write_color_png(const fs::path& path, const ColorImage& img) {
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const auto& c = img(u, v);
      bgr.at<cv::Vec3b>(v, u) = cv::Vec3b(c[2], c[1], c[0]);
    }
  if (!cv::imwrite(path.string(), bgr)) throw InputError("cannot write " + path.string());
}

void write_depth_png(const fs::path& path, const DepthImage& depth) {
  cv::Mat raw(depth.height(), depth.width(), CV_16UC1);
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      const double mm = std::round(depth(u, v) * 1000.0);
      raw.at<std::uint16_t>(v, u) = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    }
  if (!cv::imwrite(path.string(), raw)) throw InputError("cannot write " + path.string());
}

Frame load_frame(const fs::path& root, long index, double timestamp) {
  Frame f;
  f.color = read_color_png(root / "color" / frame_name(index, "png"));
  f.depth = read_depth_png(root / "depth" / frame_name(index, "png"));
  if (f.color.width() != f.depth.width() || f.color.height() != f.depth.height())
    throw DataError("frame " + std::to_string(index) + ": colour and depth sizes differ");
  f.index = index;
  f.timestamp = timestamp;
  return f;
}

void save_frame(const fs::path& root, const Frame& frame) {
  fs::create_directories(root / "color");
  fs::create_directories(root / "depth");
  write_color_png(root / "color" / frame_name(frame.index, "png"), frame.color);
  write_depth_png(root / "depth" / frame_name(frame.index, "png"), frame.depth);
}

std::vector<LabeledFrame> render_sequence(const SyntheticScene& scene) {
  std::vector<LabeledFrame> frames;
  for (std::size_t i = 0; i < scene.trajectory.size(); ++i) {
    const auto& tp = scene.trajectory.poses[i];
    LabeledFrame lf = render(scene, tp.pose, scene.spec.intr);
    lf.frame.index = static_cast<long>(i);
    lf.frame.timestamp = tp.timestamp;
    frames.push_back(std::move(lf));
  }
  return frames;
}

std::vector<QueryEmbedding> synthetic_queries(const SyntheticScene& scene) {
  std::vector<QueryEmbedding> out;
  for (const auto& [cls, e] : scene.class_embeddings) out.push_back({"class" + std::to_string(cls), e});
  out.push_back(object_query(scene));
  return out;
}

std::vector<LabeledFrame> write_synthetic_dataset(const fs::path& root, const SyntheticScene& scene,
                                                  const SyntheticDatasetOptions& options) {
  fs::create_directories(root / "segb");
  save_intrinsics(root / "intrinsics.txt", scene.spec.intr);
  auto frames = render_sequence(scene);
  std::ofstream stamps(root / "timestamps.txt");
  stamps.precision(17);
  for (const auto& lf : frames) {
    save_frame(root, lf.frame);
    save_segb(root / "segb" / frame_name(lf.frame.index, "segb"),
              synthetic_encode(lf, scene, options.sigma, options.seed));
    stamps << lf.frame.index << ' ' << lf.frame.timestamp << '\n';
  }
  save_trajectory(root / "gt_trajectory.txt", scene.trajectory);
  if (options.write_poses) save_trajectory(root / "poses.txt", scene.trajectory);
  save_txtq(root / "queries.txtq", synthetic_queries(scene));
  return frames;
}

}  // namespace vlmap
