#include "vlmap/repl.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vlmap/errors.hpp"

namespace vlmap {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw InputError("not a number: " + s);
  return v;
}

Eigen::Vector3d centroid(const MapSnapshot& map, std::span<const std::uint32_t> ids) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (auto id : ids) c += map.position(id).cast<double>();
  return ids.empty() ? c : Eigen::Vector3d(c / static_cast<double>(ids.size()));
}

void print_vec(std::ostream& out, const Eigen::Vector3d& v) {
  out << v.x() << ' ' << v.y() << ' ' << v.z();
}

}  // namespace

QueryRepl::QueryRepl(MapSnapshot map, std::vector<QueryEmbedding> queries, ReplOptions options)
    : map_(std::move(map)), options_(options) {
  for (auto& q : queries) {
    if (q.embedding.size() != map_.dim())
      throw InputError("query '" + q.label + "' has dimension " + std::to_string(q.embedding.size()) +
                       ", map has " + std::to_string(map_.dim()));
    if (q.label == "object")
      object_ = q;
    else
      queries_.push_back(std::move(q));
  }
  if (object_.label.empty()) throw InputError("query set has no \"object\" entry");
}

const QueryEmbedding* QueryRepl::find(const std::string& label) const {
  for (const auto& q : queries_)
    if (q.label == label) return &q;
  return nullptr;
}

bool QueryRepl::execute(const std::string& line, std::ostream& out) {
  const auto words = split(line);
  if (words.empty()) return true;
  const std::string& cmd = words.front();
  const std::vector<std::string> args(words.begin() + 1, words.end());
  try {
    if (cmd == "quit" || cmd == "exit") return false;
    if (cmd == "query")
      cmd_query(args, out);
    else if (cmd == "segment")
      cmd_segment(args, out);
    else if (cmd == "grasp")
      cmd_grasp(args, out);
    else if (cmd == "export")
      cmd_export(args, out);
    else if (cmd == "labels") {
      out << "labels";
      for (const auto& q : queries_) out << ' ' << q.label;
      out << '\n';
    } else
      throw InputError("unknown command '" + cmd + "'");
  } catch (const Error& e) {
    out << "error " << e.kind() << ": " << e.what() << '\n';
  }
  return true;
}

void QueryRepl::cmd_query(const std::vector<std::string>& args, std::ostream& out) {
  if (args.size() != 1) throw InputError("usage: query <label>");
  const QueryEmbedding* q = find(args[0]);
  if (!q) throw InputError("unknown label '" + args[0] + "'");
  last_heatmap_ = heatmap(map_, *q);
  const QueryResult part = partition(map_, std::span(q, 1), object_);
  double sum = 0, max = 0;
  for (float s : last_heatmap_) {
    sum += s;
    max = std::max<double>(max, s);
  }
  const double mean = last_heatmap_.empty() ? 0.0 : sum / static_cast<double>(last_heatmap_.size());
  out << "query " << q->label << " points " << map_.size() << " above_object " << part.sets[0].ids.size()
      << " mean " << mean << " max " << max << '\n';
}

void QueryRepl::cmd_segment(const std::vector<std::string>& args, std::ostream& out) {
  if (args.empty()) throw InputError("usage: segment <labels...>");
  std::vector<QueryEmbedding> selected;
  for (const auto& label : args) {
    const QueryEmbedding* q = find(label);
    if (!q) throw InputError("unknown label '" + label + "'");
    selected.push_back(*q);
  }
  const QueryResult res = segment_3d(map_, selected, object_, options_.segment);
  for (const auto& set : res.sets) {
    std::vector<Eigen::Vector3f> pts;
    pts.reserve(set.ids.size());
    for (auto id : set.ids) pts.push_back(map_.position(id));
    const DbscanResult clusters = dbscan(pts, options_.segment.eps, options_.segment.min_pts);
    out << "segment " << set.label << " points " << set.ids.size() << " clusters " << clusters.clusters
        << " centroid ";
    print_vec(out, centroid(map_, set.ids));
    out << '\n';
    for (int c = 0; c < clusters.clusters; ++c) {
      std::vector<std::uint32_t> members;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (clusters.labels[i] == c) members.push_back(set.ids[i]);
      out << "  cluster " << c << " points " << members.size() << " centroid ";
      print_vec(out, centroid(map_, members));
      out << '\n';
    }
  }
}

void QueryRepl::cmd_grasp(const std::vector<std::string>& args, std::ostream& out) {
  if (args.size() != 5) throw InputError("usage: grasp <label> <ax> <ay> <az> <depth>");
  const QueryEmbedding* q = find(args[0]);
  if (!q) throw InputError("unknown label '" + args[0] + "'");
  Eigen::Vector3d approach(parse_number(args[1]), parse_number(args[2]), parse_number(args[3]));
  const double depth = parse_number(args[4]);
  if (!(approach.norm() > 0)) throw InputError("approach direction must be non-zero");
  if (!(depth > 0)) throw InputError("gripper depth must be positive");
  approach.normalize();

  SegmentParams params = options_.segment;
  params.largest_cluster_only = true;
  const QueryResult res = segment_3d(map_, std::span(q, 1), object_, params);
  std::vector<Eigen::Vector3d> pts;
  for (auto id : res.sets[0].ids) pts.push_back(map_.position(id).cast<double>());
  const GraspPose g = extract_grasp(pts, approach, depth, options_.grasp);
  out << "grasp " << q->label << " points " << pts.size() << " position ";
  print_vec(out, g.position);
  out << " closing ";
  print_vec(out, g.closing_axis());
  out << " approach ";
  print_vec(out, g.approach_axis());
  out << " width " << g.width << '\n';
}

void QueryRepl::cmd_export(const std::vector<std::string>& args, std::ostream& out) {
  if (args.empty() || args.size() > 2) throw InputError("usage: export <path> [label]");
  std::optional<std::span<const float>> sim;
  std::vector<float> h;
  if (args.size() == 2) {
    const QueryEmbedding* q = find(args[1]);
    if (!q) throw InputError("unknown label '" + args[1] + "'");
    h = heatmap(map_, *q);
    sim = std::span<const float>(h);
  } else if (!last_heatmap_.empty()) {
    sim = std::span<const float>(last_heatmap_);
  }
  save_ply(args[0], map_, sim, options_.ply);
  out << "export " << args[0] << " points " << map_.size() << (sim ? " heatmap" : " colour") << '\n';
}

void run_query_repl(const MapSnapshot& map, std::span<const QueryEmbedding> queries, std::istream& in,
                    std::ostream& out, const ReplOptions& options) {
  QueryRepl repl(map, {queries.begin(), queries.end()}, options);
  out << std::setprecision(6);
  for (std::string line;;) {
    if (options.prompt) out << "vlmap> " << std::flush;
    if (!std::getline(in, line)) break;
    if (!repl.execute(line, out)) break;
    out << std::flush;
  }
}

}  // namespace vlmap
