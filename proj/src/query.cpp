#include "vlmap/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "binary_io.hpp"
#include "vlmap/errors.hpp"

namespace vlmap {

namespace {

constexpr std::string_view kMagic = "TXTQ";
constexpr std::uint16_t kVersion = 1;

void check_dim(const MapSnapshot& map, const QueryEmbedding& q) {
  if (q.embedding.size() != map.dim())
    throw InputError("query '" + q.label + "' has dimension " + std::to_string(q.embedding.size()) +
                     ", map has " + std::to_string(map.dim()));
}

}  // namespace

std::vector<QueryEmbedding> parse_txtq(std::span<const char> bytes) {
  detail::ByteReader in(bytes);
  if (in.bytes(4, "magic") != kMagic) throw FormatError("bad TXTQ magic", 0);
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) throw FormatError("unsupported TXTQ version " + std::to_string(version), 4);
  const auto dim = in.get<std::uint32_t>("dimension");
  const auto count = in.get<std::uint32_t>("entry count");
  std::vector<QueryEmbedding> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string ctx = "entry " + std::to_string(k);
    QueryEmbedding q;
    const auto len = in.get<std::uint16_t>(ctx + " label length");
    q.label = std::string(in.bytes(len, ctx + " label"));
    q.embedding.resize(dim);
    in.get_f32s(q.embedding, ctx + " vector");
    double sq = 0;
    for (float x : q.embedding) sq += double(x) * x;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-3)
      throw DataError(ctx + " ('" + q.label + "') vector norm " + std::to_string(norm) + " is not unit");
    if (std::abs(norm - 1.0) > 1e-6)
      for (float& x : q.embedding) x = static_cast<float>(x / norm);
    out.push_back(std::move(q));
  }
  if (in.remaining() != 0)
    throw FormatError(std::to_string(in.remaining()) + " trailing bytes after TXTQ payload", in.offset());
  return out;
}

std::vector<char> emit_txtq(std::span<const QueryEmbedding> queries) {
  detail::ByteWriter out;
  out.bytes(kMagic);
  out.put(kVersion);
  const std::uint32_t dim = queries.empty() ? 0 : static_cast<std::uint32_t>(queries[0].embedding.size());
  out.put(dim);
  out.put(static_cast<std::uint32_t>(queries.size()));
  for (const auto& q : queries) {
    if (q.embedding.size() != dim) throw InputError("emit_txtq: mixed vector dimensions");
    if (q.label.size() > 0xFFFF) throw InputError("emit_txtq: label longer than 65535 bytes");
    out.put(static_cast<std::uint16_t>(q.label.size()));
    out.bytes(q.label);
    out.put_f32s(q.embedding);
  }
  return out.take();
}

std::vector<QueryEmbedding> load_txtq(const std::filesystem::path& path) {
  return parse_txtq(detail::read_file(path.string()));
}

void save_txtq(const std::filesystem::path& path, std::span<const QueryEmbedding> queries) {
  detail::write_file(path.string(), emit_txtq(queries));
}

std::vector<float> heatmap(const MapSnapshot& map, const QueryEmbedding& query) {
  check_dim(map, query);
  std::vector<float> out(map.size());
  const std::size_t dim = map.dim();
  const float* q = query.embedding.data();
  std::size_t base = 0;
  for (const auto& chunk : map.chunks()) {
    const float* e = chunk->embeddings.data();
    for (std::size_t j = 0; j < chunk->size(); ++j, e += dim) {
      double dot = 0;
      for (std::size_t k = 0; k < dim; ++k) dot += double(q[k]) * e[k];
      out[base + j] = static_cast<float>(std::clamp((dot + 1.0) * 0.5, 0.0, 1.0));
    }
    base += chunk->size();
  }
  return out;
}

QueryResult partition(const MapSnapshot& map, std::span<const QueryEmbedding> queries,
                      const QueryEmbedding& object_query) {
  if (queries.empty()) throw InputError("partition needs at least one task query");
  QueryResult res;
  for (const auto& q : queries) res.similarities.push_back(heatmap(map, q));
  res.object_similarity = heatmap(map, object_query);
  res.sets.resize(queries.size());
  for (std::size_t k = 0; k < queries.size(); ++k) res.sets[k].label = queries[k].label;
  for (std::size_t i = 0; i < map.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < queries.size(); ++k)
      if (res.similarities[k][i] > res.similarities[best][i]) best = k;
    const float s = res.similarities[best][i];
    if (res.object_similarity[i] > s) {
      res.discarded.push_back(static_cast<std::uint32_t>(i));
      continue;
    }
    res.sets[best].ids.push_back(static_cast<std::uint32_t>(i));
    res.sets[best].similarity.push_back(s);
  }
  return res;
}

namespace {
constexpr double kVarFloor = 1e-6;
}  // namespace

GmmFit fit_gmm3(std::span<const double> values) {
  if (values.size() < 3) throw InputError("fit_gmm3 needs at least 3 values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw InputError("fit_gmm3: all values are equal");

  constexpr int K = 3;
  constexpr double kLog2Pi = 1.8378770664093453;
  GmmFit fit;
  fit.mean = {lo, 0.5 * (lo + hi), hi};
  const double v0 = std::max(std::pow((hi - lo) / 6.0, 2) + 1e-12, kVarFloor);
  fit.variance = {v0, v0, v0};
  fit.weight = {1.0 / 3, 1.0 / 3, 1.0 / 3};

  const std::size_t n = values.size();
  std::vector<double> resp(n * K);
  // E-step; returns the log-likelihood of the current parameters.
  auto expectation = [&]() {
    double ll = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double lp[K];
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = values[i] - fit.mean[k];
        lp[k] = std::log(fit.weight[k]) - 0.5 * (kLog2Pi + std::log(fit.variance[k]) + d * d / fit.variance[k]);
        mx = std::max(mx, lp[k]);
      }
      double sum = 0;
      for (int k = 0; k < K; ++k) sum += std::exp(lp[k] - mx);
      const double lse = mx + std::log(sum);
      ll += lse;
      for (int k = 0; k < K; ++k) resp[i * K + k] = std::exp(lp[k] - lse);
    }
    return ll;
  };

  double ll = expectation();
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < 200; ++it) {
    for (int k = 0; k < K; ++k) {
      double nk = 0, sx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * K + k];
        sx += resp[i * K + k] * values[i];
      }
      // An emptied component keeps its parameters and drops out.
      if (nk < 1e-12) {
        fit.weight[k] = std::max(nk / n, 1e-300);
        continue;
      }
      const double mu = sx / nk;
      double sv = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - mu;
        sv += resp[i * K + k] * d * d;
      }
      fit.mean[k] = mu;
      fit.variance[k] = std::max(sv / nk, kVarFloor);
      fit.weight[k] = nk / n;
    }
    const double next = expectation();
    fit.log_likelihood.push_back(next);
    const double gain = next - ll;
    ll = next;
    if (std::abs(gain) < 1e-6) break;
  }

  fit.top = static_cast<int>(std::max_element(fit.mean.begin(), fit.mean.end()) - fit.mean.begin());
  fit.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    fit.assignment[i] = static_cast<int>(std::max_element(resp.begin() + i * K, resp.begin() + i * K + K) -
                                         (resp.begin() + i * K));
  return fit;
}

std::vector<std::size_t> gmm_filter(std::span<const double> values) {
  std::vector<std::size_t> out;
  if (values.size() < 3) throw InputError("gmm_filter needs at least 3 values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  // A spread below the floor's standard deviation is a single mode; the three
  // components would coincide and the top one could end up owning nothing.
  if (!(*hi - *lo >= std::sqrt(kVarFloor))) {
    out.resize(values.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  const GmmFit fit = fit_gmm3(values);
  // Highest-mean component among those that own at least one value.
  std::array<bool, 3> owns{};
  for (int a : fit.assignment) owns[a] = true;
  int top = -1;
  for (int k = 0; k < 3; ++k)
    if (owns[k] && (top < 0 || fit.mean[k] > fit.mean[top])) top = k;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (fit.assignment[i] == top) out.push_back(i);
  return out;
}

DbscanResult dbscan(std::span<const Eigen::Vector3f> points, double eps, std::size_t min_pts) {
  if (!(eps > 0)) throw InputError("dbscan: eps must be positive");
  if (min_pts < 1) throw InputError("dbscan: min_pts must be >= 1");
  const std::size_t n = points.size();
  DbscanResult res;
  res.labels.assign(n, -1);
  if (n == 0) return res;

  VoxelIndex grid(eps);
  for (std::size_t i = 0; i < n; ++i) grid.insert(static_cast<std::uint32_t>(i), points[i]);
  const double eps2 = eps * eps;
  std::vector<std::vector<std::uint32_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i)
    grid.for_each_in_stencil(grid.key_of(points[i]), [&](std::uint32_t j) {
      if (squared_distance(points[i], points[j]) <= eps2) neighbours[i].push_back(j);
    });

  std::vector<char> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = neighbours[i].size() >= min_pts;

  std::vector<std::uint32_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || res.labels[i] != -1) continue;
    const int id = res.clusters++;
    res.labels[i] = id;
    frontier.assign(1, static_cast<std::uint32_t>(i));
    while (!frontier.empty()) {
      const auto p = frontier.back();
      frontier.pop_back();
      for (const auto q : neighbours[p]) {
        if (res.labels[q] != -1) continue;
        res.labels[q] = id;
        if (core[q]) frontier.push_back(q);
      }
    }
  }
  return res;
}

std::vector<std::size_t> dbscan_filter(std::span<const Eigen::Vector3f> points, double eps,
                                       std::size_t min_pts, bool largest_only) {
  const DbscanResult res = dbscan(points, eps, min_pts);
  int keep = -1;
  if (largest_only && res.clusters > 0) {
    std::vector<std::size_t> sizes(res.clusters, 0);
    for (int l : res.labels)
      if (l >= 0) ++sizes[l];
    keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (res.labels[i] >= 0 && (keep < 0 || res.labels[i] == keep)) out.push_back(i);
  return out;
}

QueryResult segment_3d(const MapSnapshot& map, std::span<const QueryEmbedding> queries,
                       const QueryEmbedding& object_query, const SegmentParams& params) {
  QueryResult res = partition(map, queries, object_query);
  for (auto& set : res.sets) {
    if (set.ids.empty()) continue;
    std::vector<std::size_t> keep(set.ids.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (set.ids.size() >= 3) {
      std::vector<double> sims(set.similarity.begin(), set.similarity.end());
      keep = gmm_filter(sims);
    }
    std::vector<Eigen::Vector3f> coords;
    coords.reserve(keep.size());
    for (auto k : keep) coords.push_back(map.position(set.ids[k]));
    const auto clustered = dbscan_filter(coords, params.eps, params.min_pts, params.largest_cluster_only);
    QuerySet filtered{set.label, {}, {}};
    for (auto c : clustered) {
      filtered.ids.push_back(set.ids[keep[c]]);
      filtered.similarity.push_back(set.similarity[keep[c]]);
    }
    set = std::move(filtered);
  }
  return res;
}

}  // namespace vlmap
