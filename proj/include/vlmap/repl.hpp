#pragma once

#include <iosfwd>
#include <string>
#include <vector>
#include <span>

#include "vlmap/embedding_map.hpp"
#include "vlmap/grasp.hpp"
#include "vlmap/map_io.hpp"
#include "vlmap/query.hpp"

namespace vlmap {

struct ReplOptions {
  SegmentParams segment;
  GraspParams grasp;
  PlyFormat ply = PlyFormat::binary_little_endian;
  bool prompt = true;
};

/// Executes one command line; returns false for `quit`/`exit`. Results and
/// errors are written as single lines to `out` ("error <kind>: ...").
class QueryRepl {
 public:
  /// `queries` must contain the generic "object" entry.
  QueryRepl(MapSnapshot map, std::vector<QueryEmbedding> queries, ReplOptions options = {});

  bool execute(const std::string& line, std::ostream& out);

 private:
  const QueryEmbedding* find(const std::string& label) const;
  void cmd_query(const std::vector<std::string>& args, std::ostream& out);
  void cmd_segment(const std::vector<std::string>& args, std::ostream& out);
  void cmd_grasp(const std::vector<std::string>& args, std::ostream& out);
  void cmd_export(const std::vector<std::string>& args, std::ostream& out);

  MapSnapshot map_;
  std::vector<QueryEmbedding> queries_;
  QueryEmbedding object_;
  ReplOptions options_;
  std::vector<float> last_heatmap_;
};

/// Reads commands until end of input or `quit`.
void run_query_repl(const MapSnapshot& map, std::span<const QueryEmbedding> queries, std::istream& in,
                    std::ostream& out, const ReplOptions& options = {});

}  // namespace vlmap
