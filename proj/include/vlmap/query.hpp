#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vlmap/embedding_map.hpp"

namespace vlmap {

/// A pre-computed text embedding.
struct QueryEmbedding {
  std::string label;
  std::vector<float> embedding;  // unit norm

  bool operator==(const QueryEmbedding&) const = default;
};

/// TXTQ v1 codec. Vectors within 1e-3 of unit norm are renormalised; others
/// raise DataError.
std::vector<QueryEmbedding> parse_txtq(std::span<const char> bytes);
std::vector<char> emit_txtq(std::span<const QueryEmbedding> queries);
std::vector<QueryEmbedding> load_txtq(const std::filesystem::path& path);
void save_txtq(const std::filesystem::path& path, std::span<const QueryEmbedding> queries);

/// Normalised cosine similarity (e_text . e + 1) / 2 for every map point.
std::vector<float> heatmap(const MapSnapshot& map, const QueryEmbedding& query);

struct QuerySet {
  std::string label;
  std::vector<std::uint32_t> ids;   // map point indices, ascending
  std::vector<float> similarity;    // parallel to ids
};

struct QueryResult {
  std::vector<std::vector<float>> similarities;  // one heatmap per task query
  std::vector<float> object_similarity;
  std::vector<QuerySet> sets;                     // Q_1 .. Q_N, pairwise disjoint
  std::vector<std::uint32_t> discarded;           // points won by the object query
};

/// Assigns every point to the query with maximum similarity. Ties go to task
/// queries over the object query, then to the lower query index. Points won
/// by `object_query` are discarded.
QueryResult partition(const MapSnapshot& map, std::span<const QueryEmbedding> queries,
                      const QueryEmbedding& object_query);

struct GmmFit {
  std::array<double, 3> mean{}, variance{}, weight{};
  std::vector<double> log_likelihood;  // after initialisation, then per EM iteration
  int top = 0;                         // component with the highest mean
  std::vector<int> assignment;         // responsibility argmax per value
};

/// 1-D three-component EM. Means start at min, mid and max; equal weights;
/// variances ((max - min) / 6)^2 + 1e-12. Stops when the log-likelihood gains
/// less than 1e-6 or after 200 iterations. Requires >= 3 values, not all equal.
GmmFit fit_gmm3(std::span<const double> values);

/// Indices whose most responsible component has the highest mean among the
/// components that own any value. Input spread below 1e-3 retains everything.
std::vector<std::size_t> gmm_filter(std::span<const double> values);

struct DbscanResult {
  std::vector<int> labels;  // cluster id, or -1 for noise
  int clusters = 0;
};

/// DBSCAN with Euclidean eps-neighbourhoods (a point is its own neighbour).
DbscanResult dbscan(std::span<const Eigen::Vector3f> points, double eps, std::size_t min_pts);

/// Indices of non-noise points, ascending; optionally only the largest cluster.
std::vector<std::size_t> dbscan_filter(std::span<const Eigen::Vector3f> points, double eps,
                                       std::size_t min_pts, bool largest_only = false);

struct SegmentParams {
  double eps = 0.02;
  std::size_t min_pts = 8;
  bool largest_cluster_only = false;
};

/// partition, then per set a similarity GMM filter followed by DBSCAN on the
/// surviving coordinates.
QueryResult segment_3d(const MapSnapshot& map, std::span<const QueryEmbedding> queries,
                       const QueryEmbedding& object_query, const SegmentParams& params = {});

}  // namespace vlmap
