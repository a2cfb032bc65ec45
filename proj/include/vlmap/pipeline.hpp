#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vlmap/embedding_map.hpp"
#include "vlmap/fusion.hpp"
#include "vlmap/metrics.hpp"
#include "vlmap/odometry.hpp"
#include "vlmap/query.hpp"

namespace vlmap {

struct RunConfig {
  std::filesystem::path input_dir;
  std::filesystem::path intrinsics;             // default: <input>/intrinsics.txt
  std::optional<std::filesystem::path> poses;   // external pose file
  std::filesystem::path segb_dir;               // default: <input>/segb
  std::optional<std::filesystem::path> queries; // TXTQ, timed as the query stage
  std::optional<std::filesystem::path> output_dir;  // map.emap, trajectory.txt, timing.csv

  std::size_t budget = 2'000'000;
  double w_new = 0.2;
  double max_dist = 0.02;
  std::optional<double> insert_dist;  // default: voxel size
  double voxel_size = 0.01;
  bool realtime = false;
  double fps = 30.0;      // frame stamping when timestamps.txt is absent
  std::uint32_t dim = 0;  // 0 = take from the first SEGB file
  bool literal_confidence = false;
  bool swap_confidence_ratio = false;
  OdometryParams odometry;

  /// Fills defaults and checks ranges and paths; throws InputError.
  void resolve();
};

/// Blocking bounded FIFO used between pipeline stages.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }
  /// Non-blocking push; false when full.
  bool try_push(T item) {
    std::lock_guard lock(mutex_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }
  /// nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }
  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
};

/// Latest published map snapshot; readers never wait on integration.
class SnapshotBoard {
 public:
  void publish(MapSnapshot snap) {
    auto next = std::make_shared<const MapSnapshot>(std::move(snap));
    std::lock_guard lock(mutex_);
    latest_.swap(next);
  }
  std::shared_ptr<const MapSnapshot> latest() const {
    std::lock_guard lock(mutex_);
    return latest_;
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const MapSnapshot> latest_ = std::make_shared<const MapSnapshot>();
};

/// Per-frame fusion: lift, correspond, integrate, enforce the budget.
class Integrator {
 public:
  Integrator(const MapConfig& config, FusionParams params);

  EmbeddingMap& map() { return map_; }
  const EmbeddingMap& map() const { return map_; }
  const FusionParams& params() const { return params_; }
  double insert_dist() const { return params_.insert_dist.value_or(map_.voxel_size()); }

  /// Runs one integration step, adding stage times to `timer` when given.
  IntegrateStats integrate_frame(const Frame& frame, const PixelLookup& lookup, const Pose& pose,
                                 const Intrinsics& intr, StageTimer* timer = nullptr);

 private:
  void sync_index();

  EmbeddingMap map_;
  FusionParams params_;
};

struct BuildHooks {
  /// After every integration step (also for geometry-only frames).
  std::function<void(const EmbeddingMap&, long frame_index)> after_frame;
  /// Snapshot board that receives a snapshot after every step.
  SnapshotBoard* board = nullptr;
};

struct BuildResult {
  EmbeddingMap map;
  Trajectory trajectory;
  StageReport timing;
  std::size_t frames_integrated = 0;
  std::size_t frames_dropped = 0;
  std::vector<std::string> warnings;  // skipped frames and other recoverable issues
};

/// Streams the sequence through decode -> odometry -> ingest + fusion. In
/// real-time mode frames are released at their timestamps and dropped whole
/// when the odometry stage has not taken the previous one yet.
BuildResult run_build(RunConfig config, const BuildHooks& hooks = {});

/// Writes map.emap, trajectory.txt and timing.csv.
void write_build_outputs(const std::filesystem::path& dir, const BuildResult& result);

}  // namespace vlmap
