// Command-line front end: build, query, segment, grasp, eval, export.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vlmap/errors.hpp"
#include "vlmap/eval.hpp"
#include "vlmap/map_io.hpp"
#include "vlmap/pipeline.hpp"
#include "vlmap/query.hpp"
#include "vlmap/repl.hpp"

namespace {

using namespace vlmap;

int exit_code(const std::string& kind) {
  if (kind == "input") return 2;
  if (kind == "format") return 3;
  if (kind == "data") return 4;
  if (kind == "tracking_lost") return 5;
  if (kind == "capacity") return 6;
  return 7;  // geometry kinds
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int report_error(const std::string& kind, const std::string& what) {
  std::cerr << "error kind=" << kind << " message=\"" << escape(what) << "\"\n";
  return kind == "internal" ? 1 : exit_code(kind);
}

struct MapArgs {
  std::string map;
  std::string queries;
};

void add_map_args(CLI::App* cmd, MapArgs& a) {
  cmd->add_option("--map", a.map, "EMAP file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--queries", a.queries, "TXTQ file")->required()->check(CLI::ExistingFile);
}

int run_repl_commands(const MapArgs& a, const std::vector<std::string>& commands, const ReplOptions& opt) {
  const EmbeddingMap map = load_map(a.map);
  const auto queries = load_txtq(a.queries);
  QueryRepl repl(map.snapshot(), queries, opt);
  std::ostringstream out;
  out.precision(6);
  for (const auto& c : commands) repl.execute(c, out);
  const std::string text = out.str();
  std::cout << text;
  // Failed commands surface as the exit status.
  const auto pos = text.find("error ");
  if (pos != std::string::npos && (pos == 0 || text[pos - 1] == '\n')) {
    const auto colon = text.find(':', pos);
    return exit_code(text.substr(pos + 6, colon - pos - 6));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vision-language embedding map builder and query tool"};
  app.require_subcommand(1);

  // build
  RunConfig cfg;
  std::string input, intrinsics, poses, segb, queries, out;
  double insert_dist = 0;
  auto* build = app.add_subcommand("build", "Fuse a recorded sequence into an embedding map");
  build->add_option("--input", input, "sequence directory")->required();
  build->add_option("--intrinsics", intrinsics, "intrinsics file (default <input>/intrinsics.txt)");
  build->add_option("--poses", poses, "external pose file; odometry otherwise");
  build->add_option("--segb", segb, "SEGB directory (default <input>/segb)");
  build->add_option("--queries", queries, "TXTQ file, evaluated every frame for timing");
  build->add_option("--out", out, "output directory")->required();
  build->add_option("--budget", cfg.budget, "maximum number of map points");
  build->add_option("--w-new", cfg.w_new, "blend weight of new observations");
  build->add_option("--max-dist", cfg.max_dist, "correspondence radius [m]");
  build->add_option("--insert-dist", insert_dist, "insertion distance [m] (default voxel size)");
  build->add_option("--voxel", cfg.voxel_size, "initial voxel size [m]");
  build->add_option("--dim", cfg.dim, "embedding dimension (default from SEGB)");
  build->add_option("--fps", cfg.fps, "frame rate when timestamps.txt is absent");
  build->add_flag("--realtime", cfg.realtime, "drop frames that arrive while busy");
  build->add_flag("--literal-confidence", cfg.literal_confidence, "head-on views score 0 instead of 1");
  build->add_flag("--swap-ratio", cfg.swap_confidence_ratio, "use c(q)/(c(p)+c(q)) in the blend weight");

  MapArgs qa;
  std::vector<std::string> labels;
  bool interactive = false;
  auto* query = app.add_subcommand("query", "Similarity statistics per label, or an interactive session");
  add_map_args(query, qa);
  query->add_option("labels", labels, "labels to query");
  query->add_flag("-i,--interactive", interactive, "read commands from stdin");

  ReplOptions ropt;
  auto* segment = app.add_subcommand("segment", "3D segmentation for one or more labels");
  add_map_args(segment, qa);
  segment->add_option("labels", labels, "labels")->required();
  segment->add_option("--eps", ropt.segment.eps, "DBSCAN radius [m]");
  segment->add_option("--min-pts", ropt.segment.min_pts, "DBSCAN core size");

  std::string glabel;
  std::vector<double> approach;
  double depth = 0.03;
  auto* grasp = app.add_subcommand("grasp", "Parallel-gripper grasp for a label");
  add_map_args(grasp, qa);
  grasp->add_option("label", glabel, "label")->required();
  grasp->add_option("--approach", approach, "approach direction ax ay az")->expected(3)->required();
  grasp->add_option("--depth", depth, "gripper depth [m]");
  grasp->add_option("--clearance", ropt.grasp.clearance, "width clearance [m]");
  grasp->add_option("--eps", ropt.segment.eps, "DBSCAN radius [m]");
  grasp->add_option("--min-pts", ropt.segment.min_pts, "DBSCAN core size");

  std::string emap, ply, elabel, etxtq;
  bool ascii = false;
  auto* exp = app.add_subcommand("export", "Export a map as PLY, optionally coloured by a query");
  exp->add_option("--map", emap, "EMAP file")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", ply, "PLY path")->required();
  exp->add_option("--queries", etxtq, "TXTQ file")->check(CLI::ExistingFile);
  exp->add_option("--label", elabel, "heatmap label (needs --queries)");
  exp->add_flag("--ascii", ascii, "ASCII instead of binary little-endian");

  EvalOptions eopt;
  std::string scene, eout;
  auto* eval = app.add_subcommand("eval", "Synthetic scene: generate, build and score");
  eval->add_option("--out", eout, "output directory")->required();
  eval->add_option("--scene", scene, "scene spec file")->check(CLI::ExistingFile);
  eval->add_option("--seed", eopt.seed, "scene seed");
  eval->add_option("--sigma", eopt.sigma, "embedding noise");
  eval->add_flag("--odometry", eopt.estimate_poses, "estimate poses instead of using ground truth");
  eval->add_option("--eps", eopt.segment.eps, "DBSCAN radius [m]");
  eval->add_option("--min-pts", eopt.segment.min_pts, "DBSCAN core size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report_error("input", e.what());
  }

  try {
    if (*build) {
      cfg.input_dir = input;
      cfg.intrinsics = intrinsics;
      cfg.segb_dir = segb;
      if (!poses.empty()) cfg.poses = poses;
      if (!queries.empty()) cfg.queries = queries;
      if (build->count("--insert-dist")) cfg.insert_dist = insert_dist;
      cfg.output_dir = out;
      const BuildResult r = run_build(cfg);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "points " << r.map.size() << " frames " << r.trajectory.size() << " integrated "
                << r.frames_integrated << " dropped " << r.frames_dropped << " hz " << r.timing.hz << '\n';
      return 0;
    }
    if (*query) {
      if (interactive) {
        const EmbeddingMap map = load_map(qa.map);
        run_query_repl(map.snapshot(), load_txtq(qa.queries), std::cin, std::cout, ropt);
        return 0;
      }
      if (labels.empty()) return report_error("input", "no labels given (or use --interactive)");
      std::vector<std::string> cmds;
      for (const auto& l : labels) cmds.push_back("query " + l);
      return run_repl_commands(qa, cmds, ropt);
    }
    if (*segment) {
      std::string cmd = "segment";
      for (const auto& l : labels) cmd += " " + l;
      return run_repl_commands(qa, {cmd}, ropt);
    }
    if (*grasp) {
      std::ostringstream cmd;
      cmd.precision(17);
      cmd << "grasp " << glabel << ' ' << approach[0] << ' ' << approach[1] << ' ' << approach[2] << ' ' << depth;
      return run_repl_commands(qa, {cmd.str()}, ropt);
    }
    if (*exp) {
      const EmbeddingMap map = load_map(emap);
      const PlyFormat fmt = ascii ? PlyFormat::ascii : PlyFormat::binary_little_endian;
      if (elabel.empty()) {
        save_ply(ply, map.snapshot(), std::nullopt, fmt);
      } else {
        if (etxtq.empty()) return report_error("input", "--label needs --queries");
        const auto qs = load_txtq(etxtq);
        const auto it = std::find_if(qs.begin(), qs.end(), [&](const QueryEmbedding& q) { return q.label == elabel; });
        if (it == qs.end()) return report_error("input", "unknown label '" + elabel + "'");
        if (it->embedding.size() != map.dim()) return report_error("input", "query dimension does not match the map");
        const auto sim = heatmap(map.snapshot(), *it);
        save_ply(ply, map.snapshot(), std::span<const float>(sim), fmt);
      }
      std::cout << "points " << map.size() << '\n';
      return 0;
    }
    if (*eval) {
      if (!scene.empty()) eopt.scene = scene;
      const EvalReport r = run_eval(eout, eopt);
      for (const auto& [k, v] : r.iou) std::cout << "iou " << k << ' ' << v << '\n';
      for (const auto& [k, v] : r.auc) std::cout << "auc " << k << ' ' << v << '\n';
      if (r.ate) std::cout << "ate " << *r.ate << '\n';
      std::cout << "hz " << r.build.timing.hz << '\n';
      return 0;
    }
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
