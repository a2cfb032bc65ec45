#include "vlmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>
#include <utility>

#include "vlmap/dataset.hpp"
#include "vlmap/errors.hpp"
#include "vlmap/map_io.hpp"
#include "vlmap/segments.hpp"

namespace vlmap {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_positive(double v, const char* name) {
  if (!(v > 0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be positive");
}

struct DecodedFrame {
  Frame frame;
  Clock::time_point released;
};

struct PosedFrame {
  Frame frame;
  Pose pose;
  Clock::time_point started;
};

}  // namespace

void RunConfig::resolve() {
  if (input_dir.empty()) throw InputError("input directory not set");
  if (!fs::is_directory(input_dir)) throw InputError("input directory not found: " + input_dir.string());
  if (intrinsics.empty()) intrinsics = input_dir / "intrinsics.txt";
  if (segb_dir.empty()) segb_dir = input_dir / "segb";
  if (!fs::is_regular_file(intrinsics)) throw InputError("intrinsics not found: " + intrinsics.string());
  if (poses && !fs::is_regular_file(*poses)) throw InputError("pose file not found: " + poses->string());
  if (queries && !fs::is_regular_file(*queries))
    throw InputError("query file not found: " + queries->string());
  if (budget == 0) throw InputError("budget must be at least 1");
  if (!(w_new >= 0 && w_new <= 1)) throw InputError("w_new must lie in [0, 1]");
  require_positive(max_dist, "max_dist");
  require_positive(voxel_size, "voxel size");
  require_positive(fps, "fps");
  if (insert_dist) require_positive(*insert_dist, "insert_dist");
}

Integrator::Integrator(const MapConfig& config, FusionParams params)
    : map_(config), params_(std::move(params)) {
  sync_index();
}

void Integrator::sync_index() { map_.set_index_cell(std::max(params_.max_dist, insert_dist())); }

IntegrateStats Integrator::integrate_frame(const Frame& frame, const PixelLookup& lookup, const Pose& pose,
                                           const Intrinsics& intr, StageTimer* timer) {
  auto timed = [&](Stage s, auto&& fn) {
    const auto t0 = Clock::now();
    auto out = fn();
    if (timer) timer->add(s, seconds_since(t0));
    return out;
  };
  const LiftedFrame lifted = timed(Stage::lift, [&] { return lift(frame, lookup, pose, intr, params_); });
  const auto corr = timed(Stage::correspond, [&] { return correspond(map_, lifted, params_.max_dist); });
  const IntegrateStats stats = timed(Stage::integrate, [&] {
    return integrate(map_, lifted, corr, params_.w_new, insert_dist(), params_.swap_confidence_ratio);
  });
  timed(Stage::budget, [&] {
    const int passes = enforce_budget(map_);
    if (passes > 0) sync_index();
    return passes;
  });
  return stats;
}

BuildResult run_build(RunConfig config, const BuildHooks& hooks) {
  config.resolve();
  const Intrinsics intr = load_intrinsics(config.intrinsics);
  const std::vector<long> indices = list_frames(config.input_dir);
  const TimestampTable stamps(config.input_dir, config.fps);

  std::optional<Trajectory> external;
  if (config.poses) external = load_trajectory(*config.poses);
  std::vector<QueryEmbedding> queries;
  if (config.queries) queries = load_txtq(*config.queries);

  FusionParams fusion;
  fusion.w_new = config.w_new;
  fusion.max_dist = config.max_dist;
  fusion.insert_dist = config.insert_dist;
  fusion.literal_confidence = config.literal_confidence;
  fusion.swap_confidence_ratio = config.swap_confidence_ratio;

  BuildResult result;
  std::mutex warn_mutex;
  auto warn = [&](std::string msg) {
    std::lock_guard lock(warn_mutex);
    result.warnings.push_back(std::move(msg));
  };

  StageTimer timer;
  const auto run_start = Clock::now();
  std::atomic<std::size_t> dropped{0};
  BoundedQueue<DecodedFrame> decoded(1);
  BoundedQueue<PosedFrame> posed(1);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto fail = [&](std::exception_ptr e) {
    std::lock_guard lock(failure_mutex);
    if (!failure) failure = e;
    decoded.close();
    posed.close();
  };

  // Decode: frames are released at their timestamps in real-time mode.
  std::thread decoder([&] {
    try {
      const auto start = Clock::now();
      const double t_first = indices.empty() ? 0.0 : stamps.at(indices.front());
      for (long idx : indices) {
        const double stamp = stamps.at(idx);
        if (config.realtime)
          std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                    std::chrono::duration<double>(stamp - t_first)));
        const auto released = Clock::now();
        DecodedFrame item;
        try {
          item = {load_frame(config.input_dir, idx, stamp), released};
        } catch (const Error& e) {
          warn("frame " + std::to_string(idx) + " skipped: " + e.what());
          continue;
        }
        if (config.realtime) {
          if (!decoded.try_push(std::move(item))) ++dropped;
        } else {
          decoded.push(std::move(item));
        }
      }
    } catch (...) {
      fail(std::current_exception());
    }
    decoded.close();
  });

  // Odometry: external poses verbatim, or frame-to-frame tracking.
  std::thread odometry([&] {
    try {
      std::optional<Tracker> tracker;
      if (!external) tracker.emplace(intr, config.odometry);
      while (auto item = decoded.pop()) {
        const auto picked = Clock::now();
        Pose pose;
        if (external) {
          const auto p = external->lookup(item->frame.timestamp);
          if (!p) {
            warn("frame " + std::to_string(item->frame.index) + " skipped: no pose");
            continue;
          }
          pose = *p;
        } else {
          const int lost_before = tracker->lost_count();
          pose = tracker->track(item->frame);
          if (tracker->lost_count() != lost_before)
            warn("frame " + std::to_string(item->frame.index) + ": tracking lost, motion extrapolated");
        }
        posed.push({std::move(item->frame), pose, picked});
      }
    } catch (...) {
      fail(std::current_exception());
    }
    posed.close();
  });

  // Ingest + fusion: the single map writer.
  std::optional<Integrator> integrator;
  auto ensure_integrator = [&](std::uint32_t dim) {
    if (integrator) return;
    MapConfig mc;
    mc.dim = dim;
    mc.budget = config.budget;
    mc.voxel_size = config.voxel_size;
    integrator.emplace(mc, fusion);
  };
  if (config.dim > 0) ensure_integrator(config.dim);

  try {
    while (auto item = posed.pop()) {
      const Frame& frame = item->frame;
      result.trajectory.push_back(frame.timestamp, item->pose);

      const auto t_ingest = Clock::now();
      std::optional<PixelLookup> lookup;
      const fs::path segb = config.segb_dir / frame_name(frame.index, "segb");
      if (fs::exists(segb)) {
        try {
          const EmbeddingFrame ef = load_segb(segb);
          if (ef.width != static_cast<std::uint32_t>(frame.width()) ||
              ef.height != static_cast<std::uint32_t>(frame.height()))
            throw DataError("SEGB size does not match the frame");
          ensure_integrator(ef.dim);
          if (ef.dim != integrator->map().dim()) throw DataError("SEGB dimension does not match the map");
          lookup = assemble_lookup(ef);
        } catch (const Error& e) {
          warn("frame " + std::to_string(frame.index) + " geometry-only: " + e.what());
        }
      } else {
        warn("frame " + std::to_string(frame.index) + " geometry-only: no SEGB");
      }
      timer.add(Stage::ingest, seconds_since(t_ingest));

      if (lookup) {
        integrator->integrate_frame(frame, *lookup, item->pose, intr, &timer);
        ++result.frames_integrated;
      }
      if (integrator && !queries.empty()) {
        const auto t_query = Clock::now();
        const MapSnapshot snap = integrator->map().snapshot();
        for (const auto& q : queries)
          if (q.embedding.size() == snap.dim()) (void)heatmap(snap, q);
        timer.add(Stage::query, seconds_since(t_query));
      }
      if (integrator) {
        if (hooks.after_frame) hooks.after_frame(integrator->map(), frame.index);
        if (hooks.board) hooks.board->publish(integrator->map().snapshot());
      }
      timer.frame_done(seconds_since(item->started));
    }
  } catch (...) {
    fail(std::current_exception());
  }
  decoder.join();
  odometry.join();
  if (failure) std::rethrow_exception(failure);

  timer.set_wall_time(seconds_since(run_start));
  for (std::size_t i = 0; i < dropped; ++i) timer.frame_dropped();
  ensure_integrator(config.dim > 0 ? config.dim : MapConfig{}.dim);
  result.map = std::move(integrator->map());
  result.frames_dropped = dropped;
  result.timing = timer.report();
  if (config.output_dir) write_build_outputs(*config.output_dir, result);
  return result;
}

void write_build_outputs(const fs::path& dir, const BuildResult& result) {
  fs::create_directories(dir);
  save_map(dir / "map.emap", result.map.snapshot());
  save_trajectory(dir / "trajectory.txt", result.trajectory);
  std::ofstream csv(dir / "timing.csv");
  if (!csv) throw InputError("cannot write " + (dir / "timing.csv").string());
  csv << result.timing.csv();
}

}  // namespace vlmap
