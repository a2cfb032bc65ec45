#include <doctest.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "fixtures.hpp"
#include "vlmap/errors.hpp"
#include "vlmap/geometry.hpp"
#include "vlmap/map_io.hpp"
#include "vlmap/pipeline.hpp"

using namespace vlmap;
using fixture::TempDir;

namespace {

RunConfig config_for(const std::filesystem::path& data, bool external = true) {
  RunConfig c;
  c.input_dir = data;
  if (external) c.poses = data / "poses.txt";
  return c;
}

}  // namespace

TEST_CASE("dataset files round trip") {
  TempDir dir("dataset");
  const SyntheticScene scene = gen_scene(fixture::small_spec(3), 2);
  const auto frames = write_synthetic_dataset(dir.path(), scene);
  REQUIRE(list_frames(dir.path()) == std::vector<long>{0, 1, 2});
  const Frame back = load_frame(dir.path(), 1, 1 / 30.0);
  CHECK(back.color == frames[1].frame.color);
  for (int v = 0; v < back.height(); ++v)
    for (int u = 0; u < back.width(); ++u) CHECK(std::abs(back.depth(u, v) - frames[1].frame.depth(u, v)) <= 0.0005 + 1e-12);
  CHECK(TimestampTable(dir.path()).at(2) == doctest::Approx(2 / 30.0));
  const Intrinsics intr = load_intrinsics(dir.path() / "intrinsics.txt");
  CHECK(intr.fx == 100);
  CHECK(intr.width == 160);
}

TEST_CASE("empty input builds an empty map") {
  TempDir dir("empty");
  save_intrinsics(dir.path() / "intrinsics.txt", {100, 100, 79.5, 59.5, 160, 120});
  std::filesystem::create_directories(dir.path() / "color");
  RunConfig c = config_for(dir.path(), false);
  c.output_dir = dir.path() / "out";
  const BuildResult r = run_build(c);
  CHECK(r.map.empty());
  CHECK(r.trajectory.empty());
  CHECK(std::filesystem::exists(dir.path() / "out" / "map.emap"));
}

TEST_CASE("configuration is validated") {
  TempDir dir("config");
  RunConfig c;
  c.input_dir = dir.path() / "missing";
  CHECK_THROWS_AS(run_build(c), InputError);
  save_intrinsics(dir.path() / "intrinsics.txt", {100, 100, 79.5, 59.5, 160, 120});
  c.input_dir = dir.path();
  c.w_new = 1.5;
  CHECK_THROWS_AS(run_build(c), InputError);
  c.w_new = 0.2;
  c.max_dist = 0;
  CHECK_THROWS_AS(run_build(c), InputError);
}

TEST_CASE("build with external poses keeps map invariants and writes outputs") {
  TempDir dir("build");
  const SyntheticScene scene = gen_scene(fixture::small_spec(10), 5);
  write_synthetic_dataset(dir.path() / "data", scene);
  RunConfig c = config_for(dir.path() / "data");
  c.output_dir = dir.path() / "out";
  c.queries = dir.path() / "data" / "queries.txtq";
  int steps = 0;
  BuildHooks hooks;
  hooks.after_frame = [&](const EmbeddingMap& m, long) {
    ++steps;
    CHECK(m.size() <= m.budget());
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK((m.confidence(i) >= 0 && m.confidence(i) <= 1));
      double n = 0;
      for (float x : m.embedding(i)) n += double(x) * x;
      CHECK(std::abs(std::sqrt(n) - 1) < 1e-5);
    }
  };
  const BuildResult r = run_build(c, hooks);
  CHECK(steps == 10);
  CHECK(r.frames_integrated == 10);
  CHECK(r.trajectory.size() == 10);
  CHECK(r.map.size() > 1000);
  double sum = 0;
  for (const auto& row : r.timing.stages) sum += row.mean_s;
  CHECK(sum <= r.timing.end_to_end_mean_s);
  CHECK(r.timing.stages[static_cast<int>(Stage::query)].mean_s > 0);

  const std::string csv = fixture::slurp(dir.path() / "out" / "timing.csv");
  CHECK(csv.rfind("stage,mean_s\n", 0) == 0);
  const EmbeddingMap back = load_map(dir.path() / "out" / "map.emap");
  CHECK(back.size() == r.map.size());
  CHECK(load_trajectory(dir.path() / "out" / "trajectory.txt").size() == 10);
}

TEST_CASE("missing SEGB files make frames geometry-only") {
  TempDir dir("nosegb");
  const SyntheticScene scene = gen_scene(fixture::small_spec(4), 5);
  write_synthetic_dataset(dir.path(), scene);
  std::filesystem::remove(dir.path() / "segb" / frame_name(2, "segb"));
  const BuildResult r = run_build(config_for(dir.path()));
  CHECK(r.frames_integrated == 3);
  CHECK(r.trajectory.size() == 4);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("geometry-only") != std::string::npos);
}

TEST_CASE("real-time mode drops frames during a stall") {
  TempDir dir("realtime");
  const SyntheticScene scene = gen_scene(fixture::small_spec(12), 5);
  write_synthetic_dataset(dir.path(), scene);
  RunConfig c = config_for(dir.path());
  c.realtime = true;
  BuildHooks hooks;
  bool stalled = false;
  hooks.after_frame = [&](const EmbeddingMap& m, long) {
    if (!stalled) {
      stalled = true;
      std::this_thread::sleep_for(std::chrono::seconds(1));
    }
    CHECK(m.size() <= m.budget());
  };
  const BuildResult r = run_build(c, hooks);
  CHECK(r.frames_dropped > 0);
  CHECK(r.timing.dropped == r.frames_dropped);
  CHECK(r.trajectory.size() + r.frames_dropped == 12);
}

TEST_CASE("snapshots published during a build stay readable") {
  TempDir dir("board");
  const SyntheticScene scene = gen_scene(fixture::small_spec(5), 5);
  write_synthetic_dataset(dir.path(), scene);
  SnapshotBoard board;
  BuildHooks hooks;
  hooks.board = &board;
  std::size_t last = 0;
  hooks.after_frame = [&](const EmbeddingMap&, long) {
    const auto snap = board.latest();
    CHECK(snap->size() >= last);
    last = snap->size();
  };
  const BuildResult r = run_build(config_for(dir.path()), hooks);
  const auto final_snap = board.latest();
  CHECK(final_snap->size() == r.map.size());
}
