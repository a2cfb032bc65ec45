#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vlmap/odometry.hpp"

namespace vlmap {

/// Area under the precision-recall curve of a heatmap binarised at 256
/// evenly spaced thresholds in [0, 1] (predicted positive when s >= t).
/// Thresholds with no predicted positive are left out; the curve is padded
/// at recall 0 with the precision of the highest remaining threshold and at
/// recall 1 with the precision at threshold 0, then integrated with the
/// trapezoidal rule. Throws InputError when gt has no positive.
double pr_auc(std::span<const float> similarity, std::span<const std::uint8_t> gt_mask);

/// RMSE of translation residuals after the least-squares rigid alignment of
/// `est` onto `gt`. Poses are paired by timestamp (10 ms tolerance).
double ate(const Trajectory& est, const Trajectory& gt);

enum class Stage : int { ingest = 0, lift, correspond, integrate, budget, query };
inline constexpr std::array<const char*, 6> kStageNames = {"ingest",    "lift",   "correspond",
                                                           "integrate", "budget", "query"};

struct StageReport {
  struct Row {
    std::string stage;
    double mean_s = 0;
  };
  std::vector<Row> stages;  // always the six pipeline stages in order
  double end_to_end_mean_s = 0;
  double hz = 0;
  std::size_t frames = 0;
  std::size_t dropped = 0;

  /// `stage,mean_s` table: six stage rows, then end_to_end, hz, dropped_frames.
  std::string csv() const;
};

/// Wall-clock accounting of the fusion loop.
class StageTimer {
 public:
  using Clock = std::chrono::steady_clock;

  void add(Stage stage, double seconds) { totals_[static_cast<int>(stage)] += seconds; }
  void frame_done(double seconds) {
    end_to_end_ += seconds;
    ++frames_;
  }
  void frame_dropped() { ++dropped_; }
  /// Wall-clock duration of the whole run; the rate is frames over this.
  void set_wall_time(double seconds) { wall_ = seconds; }
  std::size_t frames() const { return frames_; }
  std::size_t dropped() const { return dropped_; }

  StageReport report() const;

  /// Adds the lifetime of the scope to one stage.
  class Scope {
   public:
    Scope(StageTimer& t, Stage s) : timer_(t), stage_(s), start_(Clock::now()) {}
    ~Scope() { timer_.add(stage_, std::chrono::duration<double>(Clock::now() - start_).count()); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    StageTimer& timer_;
    Stage stage_;
    Clock::time_point start_;
  };

 private:
  std::array<double, 6> totals_{};
  double end_to_end_ = 0;
  std::size_t frames_ = 0;
  std::size_t dropped_ = 0;
  double wall_ = 0;
};

void write_auc_csv(const std::filesystem::path& path,
                   std::span<const std::pair<std::string, double>> rows);

}  // namespace vlmap
