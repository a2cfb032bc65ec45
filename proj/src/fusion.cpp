#include "vlmap/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>

#include "vlmap/errors.hpp"

namespace vlmap {

namespace {

// Lifted points bucketed on a dense grid over their bounding box, padded by
// two cells so the stencil of any cell next to an occupied one stays inside.
// Ids ascend within each cell.
struct DenseGrid {
  CellKey lo{};
  std::int64_t nx = 0, ny = 0, nz = 0;
  std::vector<std::uint32_t> start;     // cells + 1 offsets into ids
  std::vector<std::uint32_t> ids;
  std::vector<std::uint32_t> occupied;  // linear indices of non-empty cells
  std::array<std::int64_t, 27> stencil{};

  std::size_t cells() const { return static_cast<std::size_t>(nx * ny * nz); }
  CellKey key(std::size_t lin) const {
    const auto l = static_cast<std::int64_t>(lin);
    return {static_cast<std::int32_t>(lo.x + l % nx), static_cast<std::int32_t>(lo.y + (l / nx) % ny),
            static_cast<std::int32_t>(lo.z + l / (nx * ny))};
  }
};

constexpr std::int64_t kMaxDenseCells = std::int64_t{1} << 22;

std::optional<DenseGrid> dense_grid(const VoxelIndex& keyer, std::span<const Eigen::Vector3f> points) {
  if (points.empty()) return std::nullopt;
  std::vector<CellKey> keys(points.size());
  CellKey mn = keyer.key_of(points[0]), mx = mn;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const CellKey k = keyer.key_of(points[i]);
    keys[i] = k;
    mn = {std::min(mn.x, k.x), std::min(mn.y, k.y), std::min(mn.z, k.z)};
    mx = {std::max(mx.x, k.x), std::max(mx.y, k.y), std::max(mx.z, k.z)};
  }
  DenseGrid g;
  g.lo = {mn.x - 2, mn.y - 2, mn.z - 2};
  g.nx = std::int64_t{mx.x} - mn.x + 5;
  g.ny = std::int64_t{mx.y} - mn.y + 5;
  g.nz = std::int64_t{mx.z} - mn.z + 5;
  if (g.nx * g.ny > kMaxDenseCells || g.nx * g.ny * g.nz > kMaxDenseCells) return std::nullopt;

  std::vector<std::uint32_t> lin(points.size());
  g.start.assign(g.cells() + 1, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const CellKey& k = keys[i];
    lin[i] = static_cast<std::uint32_t>((k.x - g.lo.x) + g.nx * ((k.y - g.lo.y) + g.ny * (k.z - g.lo.z)));
    if (g.start[lin[i] + 1]++ == 0) g.occupied.push_back(lin[i]);
  }
  for (std::size_t c = 0; c < g.cells(); ++c) g.start[c + 1] += g.start[c];
  g.ids.resize(points.size());
  std::vector<std::uint32_t> fill(g.start.begin(), g.start.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i) g.ids[fill[lin[i]]++] = static_cast<std::uint32_t>(i);

  int n = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) g.stencil[n++] = dx + g.nx * (dy + g.ny * dz);
  return g;
}

// Cells whose stencil contains at least one point of the grid.
std::vector<std::uint32_t> near_cells(const DenseGrid& g) {
  std::vector<char> mark(g.cells(), 0);
  std::vector<std::uint32_t> out;
  out.reserve(g.occupied.size() * 4);
  for (const auto c : g.occupied)
    for (const auto o : g.stencil) {
      const auto n = static_cast<std::uint32_t>(c + o);
      if (!mark[n]) {
        mark[n] = 1;
        out.push_back(n);
      }
    }
  return out;
}

}  // namespace

double view_confidence(const Eigen::Vector3d& normal, const Eigen::Vector3d& point,
                       bool literal_confidence) {
  const Eigen::Vector3d ray = point.normalized();  // camera -> point
  const double dot = literal_confidence ? normal.dot(ray) : normal.dot(-ray);
  return std::clamp((dot + 1.0) * 0.5, 0.0, 1.0);
}

LiftedFrame lift(const Frame& frame, const PixelLookup& lookup, const Pose& pose,
                 const Intrinsics& intr, const FusionParams& params) {
  if (lookup.width() != frame.width() || lookup.height() != frame.height())
    throw InputError("lift: lookup is " + std::to_string(lookup.width()) + "x" +
                     std::to_string(lookup.height()) + ", frame is " +
                     std::to_string(frame.width()) + "x" + std::to_string(frame.height()));
  LiftedFrame out;
  out.frame_index = frame.index;
  out.dim = lookup.dim();
  if (lookup.segment_count() == 0) return out;
  for (std::size_t s = 0; s < lookup.segment_count(); ++s) {
    const auto e = lookup.segment_embedding(static_cast<std::int32_t>(s));
    out.segment_embeddings.insert(out.segment_embeddings.end(), e.begin(), e.end());
  }

  const PointImage points = back_project(frame.depth, intr);
  const NormalImage normals = estimate_normals(points);
  const bool has_color = frame.color.width() == frame.width() && frame.color.height() == frame.height();
  const Eigen::Matrix3f rot = pose.rotation.cast<float>();
  const Eigen::Vector3f trans = pose.translation.cast<float>();
  out.positions.reserve(points.size());
  for (int v = 0; v < frame.height(); ++v) {
    for (int u = 0; u < frame.width(); ++u) {
      const auto id = lookup.segment(u, v);
      if (id == PixelLookup::kNone) continue;
      const auto& p = points(u, v);
      const auto& n = normals(u, v);
      if (!is_valid(p) || !is_valid(n)) continue;
      out.positions.push_back(rot * p.cast<float>() + trans);
      out.segment.push_back(id);
      out.confidences.push_back(static_cast<float>(view_confidence(n, p, params.literal_confidence)));
      out.colors.push_back(has_color ? frame.color(u, v) : Rgb8::Zero());
    }
  }
  return out;
}

std::vector<Correspondence> correspond(const EmbeddingMap& map, const LiftedFrame& lifted,
                                       double max_dist) {
  if (!(max_dist > 0)) throw InputError("correspond: max_dist must be positive");
  std::vector<Correspondence> out;
  if (map.empty() || lifted.empty()) return out;

  // The 27-cell stencil is exact only when the cell is at least max_dist.
  std::optional<VoxelIndex> wide;
  if (max_dist > map.index().cell_size()) {
    wide.emplace(max_dist);
    for (std::size_t i = 0; i < map.size(); ++i)
      wide->insert(static_cast<std::uint32_t>(i), map.position(i));
  }
  const VoxelIndex& map_index = wide ? *wide : map.index();
  const double max_d2 = max_dist * max_dist;

  if (const auto grid = dense_grid(map_index, lifted.positions)) {
    // Ties go to the lowest lifted id; a candidate exactly at max_dist counts.
    std::vector<std::uint32_t> nearby;
    std::vector<double> nx, ny, nz;
    for (const auto cell : near_cells(*grid)) {
      const auto* map_ids = map_index.cell(grid->key(cell));
      if (!map_ids) continue;
      nearby.clear();
      nx.clear();
      ny.clear();
      nz.clear();
      for (const auto o : grid->stencil) {
        const auto c = static_cast<std::size_t>(cell + o);
        for (auto k = grid->start[c]; k < grid->start[c + 1]; ++k) {
          const auto id = grid->ids[k];
          const Eigen::Vector3f& p = lifted.positions[id];
          nearby.push_back(id);
          nx.push_back(p.x());
          ny.push_back(p.y());
          nz.push_back(p.z());
        }
      }
      const std::size_t m = nearby.size();
      for (const auto q : *map_ids) {
        const Eigen::Vector3f& qp = map.position(q);
        const double qx = qp.x(), qy = qp.y(), qz = qp.z();
        double best = max_d2;
        std::uint32_t best_id = std::numeric_limits<std::uint32_t>::max();
        for (std::size_t k = 0; k < m; ++k) {
          const double dx = qx - nx[k], dy = qy - ny[k], dz = qz - nz[k];
          const double d2 = dx * dx + dy * dy + dz * dz;
          if (d2 < best || (d2 == best && nearby[k] < best_id)) {
            best = d2;
            best_id = nearby[k];
          }
        }
        if (best_id != std::numeric_limits<std::uint32_t>::max()) out.push_back({q, best_id});
      }
    }
    std::sort(out.begin(), out.end(),
              [](const Correspondence& a, const Correspondence& b) { return a.map_id < b.map_id; });
    return out;
  }

  VoxelIndex lifted_index(map_index.cell_size());
  lifted_index.reserve(lifted.size() / 4);
  for (std::size_t i = 0; i < lifted.size(); ++i)
    lifted_index.insert(static_cast<std::uint32_t>(i), lifted.positions[i]);

  std::unordered_set<CellKey, CellKeyHash> candidates;
  candidates.reserve(lifted_index.cell_count() * 4);
  lifted_index.for_each_cell([&](const CellKey& key, const auto&) {
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) candidates.insert({key.x + dx, key.y + dy, key.z + dz});
  });

  // Fallback for very large extents. Ids ascend within the gathered list, so
  // the first strict minimum is also the lowest index among equal distances.
  std::vector<std::uint32_t> nearby;
  std::vector<double> nx, ny, nz;
  for (const CellKey& key : candidates) {
    const auto* map_ids = map_index.cell(key);
    if (!map_ids) continue;
    nearby.clear();
    lifted_index.for_each_in_stencil(key, [&](std::uint32_t id) { nearby.push_back(id); });
    std::sort(nearby.begin(), nearby.end());
    const std::size_t m = nearby.size();
    nx.resize(m);
    ny.resize(m);
    nz.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const Eigen::Vector3f& p = lifted.positions[nearby[k]];
      nx[k] = p.x();
      ny[k] = p.y();
      nz[k] = p.z();
    }
    for (const auto q : *map_ids) {
      const Eigen::Vector3f& qp = map.position(q);
      const double qx = qp.x(), qy = qp.y(), qz = qp.z();
      double best = max_d2;
      std::size_t best_k = m;
      for (std::size_t k = 0; k < m; ++k) {
        const double dx = qx - nx[k], dy = qy - ny[k], dz = qz - nz[k];
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 < best || (d2 == best && best_k == m)) {
          best = d2;
          best_k = k;
        }
      }
      if (best_k < m) out.push_back({q, nearby[best_k]});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Correspondence& a, const Correspondence& b) { return a.map_id < b.map_id; });
  return out;
}

double blend_weight(double c_p, double c_q, double w_new, bool swap_ratio) {
  const double sum = c_p + c_q;
  if (sum < 1e-12) return 1.0 - 0.5 * (1.0 - w_new);
  const double ratio = (swap_ratio ? c_q : c_p) / sum;
  return 1.0 - (1.0 - ratio) * (1.0 - w_new);
}

IntegrateStats integrate(EmbeddingMap& map, const LiftedFrame& lifted,
                         std::span<const Correspondence> corr, double w_new, double insert_dist,
                         bool swap_ratio) {
  if (lifted.dim != 0 && lifted.dim != map.dim())
    throw InputError("integrate: lifted dimension " + std::to_string(lifted.dim) +
                     " differs from map dimension " + std::to_string(map.dim()));
  IntegrateStats stats;
  if (lifted.empty()) return stats;

  // Insertion candidates are decided against the map before any change.
  std::vector<char> covered(lifted.size(), 0);
  if (!map.empty()) {
    std::optional<VoxelIndex> wide;
    if (insert_dist > map.index().cell_size()) {
      wide.emplace(insert_dist);
      for (std::size_t i = 0; i < map.size(); ++i)
        wide->insert(static_cast<std::uint32_t>(i), map.position(i));
    }
    const VoxelIndex& map_index = wide ? *wide : map.index();
    const double ins2 = insert_dist * insert_dist;
    std::vector<double> nx, ny, nz;
    auto cover = [&](auto&& ids, auto&& for_each_map_id) {
      nx.clear();
      ny.clear();
      nz.clear();
      for_each_map_id([&](std::uint32_t id) {
        const Eigen::Vector3f& q = map.position(id);
        nx.push_back(q.x());
        ny.push_back(q.y());
        nz.push_back(q.z());
      });
      const std::size_t m = nx.size();
      if (m == 0) return;
      for (const auto p : ids) {
        const Eigen::Vector3f& pp = lifted.positions[p];
        const double px = pp.x(), py = pp.y(), pz = pp.z();
        for (std::size_t k = 0; k < m; ++k) {
          const double dx = px - nx[k], dy = py - ny[k], dz = pz - nz[k];
          if (dx * dx + dy * dy + dz * dz <= ins2) {
            covered[p] = 1;
            break;
          }
        }
      }
    };
    if (const auto grid = dense_grid(map_index, lifted.positions)) {
      // One hash lookup per map cell near the frame instead of 27 per lifted cell.
      std::vector<const std::vector<std::uint32_t>*> map_cells(grid->cells(), nullptr);
      for (const auto cell : near_cells(*grid)) map_cells[cell] = map_index.cell(grid->key(cell));
      for (const auto cell : grid->occupied) {
        const std::span<const std::uint32_t> ids(grid->ids.data() + grid->start[cell],
                                                 grid->start[cell + 1] - grid->start[cell]);
        cover(ids, [&](auto&& f) {
          for (const auto o : grid->stencil)
            if (const auto* m = map_cells[static_cast<std::size_t>(cell + o)])
              for (const auto id : *m) f(id);
        });
      }
    } else {
      VoxelIndex lifted_index(map_index.cell_size());
      for (std::size_t i = 0; i < lifted.size(); ++i)
        lifted_index.insert(static_cast<std::uint32_t>(i), lifted.positions[i]);
      lifted_index.for_each_cell([&](const CellKey& key, const std::vector<std::uint32_t>& ids) {
        cover(ids, [&](auto&& f) { map_index.for_each_in_stencil(key, f); });
      });
    }
  }

  const auto dim = static_cast<Eigen::Index>(map.dim());
  Eigen::VectorXf blended(dim);
  for (const auto& c : corr) {
    const double cp = lifted.confidences[c.lifted_id];
    auto m = map.mutate(c.map_id);
    const double cq = m.confidence;
    const double w = blend_weight(cp, cq, w_new, swap_ratio);
    m.confidence = static_cast<float>(std::clamp((1.0 - w) * cp + w * cq, 0.0, 1.0));
    const auto ep = lifted.embedding(c.lifted_id);
    Eigen::Map<Eigen::VectorXf> eq(m.embedding.data(), dim);
    blended = static_cast<float>(1.0 - w) * Eigen::Map<const Eigen::VectorXf>(ep.data(), dim) +
              static_cast<float>(w) * eq;
    const double sq = blended.squaredNorm();
    // Antipodal inputs at w = 0.5 cancel; keep the existing direction then.
    if (sq >= 1e-24) eq = blended * static_cast<float>(1.0 / std::sqrt(sq));
    ++stats.blended;
  }

  for (std::size_t i = 0; i < lifted.size(); ++i) {
    if (covered[i]) continue;
    map.append(lifted.positions[i], lifted.embedding(i), lifted.confidences[i], lifted.colors[i]);
    ++stats.inserted;
  }
  return stats;
}

int enforce_budget(EmbeddingMap& map) {
  int passes = 0;
  const std::uint32_t dim = map.dim();
  std::vector<double> emb(dim), emb_plain(dim);
  std::vector<float> e(dim);
  while (map.size() > map.budget()) {
    ++passes;
    const VoxelIndex grid(map.voxel_size());
    std::unordered_map<CellKey, std::uint32_t, CellKeyHash> group_of;
    group_of.reserve(map.size() / 2);
    std::vector<std::uint32_t> group(map.size());
    std::uint32_t groups = 0;
    for (std::size_t i = 0; i < map.size(); ++i) {
      auto [it, fresh] = group_of.try_emplace(grid.key_of(map.position(i)), groups);
      if (fresh) ++groups;
      group[i] = it->second;
    }
    if (groups == map.size()) {
      map.set_voxel_size(map.voxel_size() * 1.25);
      continue;
    }

    // Bucket members by group; groups are numbered by first occurrence.
    std::vector<std::uint32_t> start(std::size_t{groups} + 1, 0);
    for (auto g : group) ++start[g + 1];
    for (std::uint32_t g = 0; g < groups; ++g) start[g + 1] += start[g];
    std::vector<std::uint32_t> members(map.size());
    {
      std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
      for (std::size_t i = 0; i < map.size(); ++i) members[fill[group[i]]++] = static_cast<std::uint32_t>(i);
    }

    MapConfig cfg{dim, map.budget(), map.voxel_size(), map.index().cell_size()};
    EmbeddingMap merged(cfg);
    for (std::uint32_t g = 0; g < groups; ++g) {
      double weight = 0;
      Eigen::Vector3d pos = Eigen::Vector3d::Zero(), pos_plain = Eigen::Vector3d::Zero();
      Eigen::Vector3d col = Eigen::Vector3d::Zero(), col_plain = Eigen::Vector3d::Zero();
      float max_conf = 0;
      std::fill(emb.begin(), emb.end(), 0.0);
      std::fill(emb_plain.begin(), emb_plain.end(), 0.0);
      const std::uint32_t count = start[g + 1] - start[g];
      for (std::uint32_t m = start[g]; m < start[g + 1]; ++m) {
        const std::uint32_t i = members[m];
        const double c = map.confidence(i);
        const Eigen::Vector3d p = map.position(i).cast<double>();
        const Eigen::Vector3d rgb = map.color(i).cast<double>();
        weight += c;
        pos += c * p;
        pos_plain += p;
        col += c * rgb;
        col_plain += rgb;
        max_conf = std::max(max_conf, map.confidence(i));
        const auto src = map.embedding(i);
        for (std::uint32_t k = 0; k < dim; ++k) {
          emb[k] += c * src[k];
          emb_plain[k] += src[k];
        }
      }
      const bool weighted = weight >= 1e-12;
      const double inv = weighted ? 1.0 / weight : 1.0 / count;
      const Eigen::Vector3d centroid = (weighted ? pos : pos_plain) * inv;
      const Eigen::Vector3d mean_col = (weighted ? col : col_plain) * inv;
      const std::vector<double>* dir = weighted ? &emb : &emb_plain;
      double sq = 0;
      for (double x : *dir) sq += x * x;
      if (sq < 1e-24) {
        // Cancelling embeddings: fall back to the unweighted direction.
        dir = &emb_plain;
        sq = 0;
        for (double x : *dir) sq += x * x;
      }
      const double norm = std::sqrt(sq);
      for (std::uint32_t k = 0; k < dim; ++k)
        e[k] = norm > 0 ? static_cast<float>((*dir)[k] / norm) : (k == 0 ? 1.0f : 0.0f);
      Rgb8 rgb;
      for (int k = 0; k < 3; ++k)
        rgb[k] = static_cast<std::uint8_t>(std::clamp(std::lround(mean_col[k]), 0L, 255L));
      merged.append(centroid.cast<float>(), e, max_conf, rgb);
    }
    map = std::move(merged);
    if (map.size() > map.budget()) map.set_voxel_size(map.voxel_size() * 1.25);
  }
  return passes;
}

}  // namespace vlmap
