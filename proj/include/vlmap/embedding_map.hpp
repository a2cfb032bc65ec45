#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "vlmap/image.hpp"

namespace vlmap {

/// Integer voxel coordinate, floor(position / cell).
struct CellKey {
  std::int32_t x = 0, y = 0, z = 0;
  bool operator==(const CellKey&) const = default;
  auto operator<=>(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    // Large odd multipliers; cheap and well-spread for dense neighbourhoods.
    std::uint64_t h = static_cast<std::uint32_t>(k.x) * 0x9E3779B185EBCA87ULL;
    h ^= static_cast<std::uint32_t>(k.y) * 0xC2B2AE3D27D4EB4FULL;
    h ^= static_cast<std::uint32_t>(k.z) * 0x165667B19E3779F9ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// Uniform voxel hash from cell key to the ids of the points inside it.
/// Nearest-neighbour queries search the 27-cell stencil, so they are exact for
/// radii up to the cell size.
class VoxelIndex {
 public:
  explicit VoxelIndex(double cell_size = 0.02) : cell_(cell_size), inv_cell_(1.0 / cell_size) {}

  double cell_size() const { return cell_; }
  std::size_t cell_count() const { return cells_.size(); }

  CellKey key_of(const Eigen::Vector3f& p) const {
    return {static_cast<std::int32_t>(std::floor(p.x() * inv_cell_)),
            static_cast<std::int32_t>(std::floor(p.y() * inv_cell_)),
            static_cast<std::int32_t>(std::floor(p.z() * inv_cell_))};
  }

  void insert(std::uint32_t id, const Eigen::Vector3f& p) { cells_[key_of(p)].push_back(id); }
  void clear() { cells_.clear(); }
  void reserve(std::size_t cells) { cells_.reserve(cells); }

  const std::vector<std::uint32_t>* cell(const CellKey& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
  }

  template <typename F>
  void for_each_cell(F&& f) const {
    for (const auto& [key, ids] : cells_) f(key, ids);
  }

  /// Calls f(id) for every point stored in the 27 cells around `key`.
  template <typename F>
  void for_each_in_stencil(const CellKey& key, F&& f) const {
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (const auto* ids = cell({key.x + dx, key.y + dy, key.z + dz}))
            for (auto id : *ids) f(id);
  }

 private:
  double cell_;
  double inv_cell_;
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> cells_;
};

/// Squared distance evaluated in double from float coordinates. Every
/// nearest-neighbour routine uses this exact expression.
inline double squared_distance(const Eigen::Vector3f& a, const Eigen::Vector3f& b) {
  const double dx = double(a.x()) - double(b.x());
  const double dy = double(a.y()) - double(b.y());
  const double dz = double(a.z()) - double(b.z());
  return dx * dx + dy * dy + dz * dz;
}

/// A map element as a self-contained value.
struct PointEntry {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  std::vector<float> embedding;
  float confidence = 0;
  Rgb8 color = Rgb8::Zero();
};

/// Fixed-capacity block of structure-of-arrays point storage.
struct MapChunk {
  static constexpr std::size_t kCapacity = 4096;

  explicit MapChunk(std::uint32_t dim);

  std::size_t size() const { return positions.size(); }
  bool full() const { return size() == kCapacity; }

  std::uint32_t dim;
  std::vector<Eigen::Vector3f> positions;
  std::vector<float> confidences;
  std::vector<Rgb8> colors;
  std::vector<float> embeddings;  // size() * dim
};

/// Immutable view of the map at one point in time. Cheap to copy; shares the
/// chunk storage with the live map until the writer modifies a chunk.
class MapSnapshot {
 public:
  MapSnapshot() = default;

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint32_t dim() const { return dim_; }

  const Eigen::Vector3f& position(std::size_t i) const {
    return chunks_[i / MapChunk::kCapacity]->positions[i % MapChunk::kCapacity];
  }
  float confidence(std::size_t i) const {
    return chunks_[i / MapChunk::kCapacity]->confidences[i % MapChunk::kCapacity];
  }
  const Rgb8& color(std::size_t i) const {
    return chunks_[i / MapChunk::kCapacity]->colors[i % MapChunk::kCapacity];
  }
  std::span<const float> embedding(std::size_t i) const {
    const auto& c = *chunks_[i / MapChunk::kCapacity];
    return {c.embeddings.data() + (i % MapChunk::kCapacity) * dim_, dim_};
  }
  PointEntry entry(std::size_t i) const;

  std::span<const std::shared_ptr<const MapChunk>> chunks() const { return chunks_; }

 private:
  friend class EmbeddingMap;
  std::vector<std::shared_ptr<const MapChunk>> chunks_;
  std::size_t size_ = 0;
  std::uint32_t dim_ = 0;
};

struct MapConfig {
  std::uint32_t dim = 512;
  std::size_t budget = 2'000'000;  // N_M
  double voxel_size = 0.01;         // s, grows while enforcing the budget
  double index_cell = 0.02;         // spatial index cell size
};

/// Budgeted point set with a spatial index. Single writer; readers take
/// snapshots. Writes copy a chunk first if any snapshot still references it.
class EmbeddingMap {
 public:
  explicit EmbeddingMap(const MapConfig& config = {});

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::uint32_t dim() const { return dim_; }
  std::size_t budget() const { return budget_; }
  void set_budget(std::size_t n) { budget_ = n; }
  double voxel_size() const { return voxel_size_; }
  void set_voxel_size(double s) { voxel_size_ = s; }

  const VoxelIndex& index() const { return index_; }
  /// Rebuilds the index when the requested cell size differs.
  void set_index_cell(double cell);

  const Eigen::Vector3f& position(std::size_t i) const {
    return chunks_[i / MapChunk::kCapacity]->positions[i % MapChunk::kCapacity];
  }
  float confidence(std::size_t i) const {
    return chunks_[i / MapChunk::kCapacity]->confidences[i % MapChunk::kCapacity];
  }
  const Rgb8& color(std::size_t i) const {
    return chunks_[i / MapChunk::kCapacity]->colors[i % MapChunk::kCapacity];
  }
  std::span<const float> embedding(std::size_t i) const {
    const auto& c = *chunks_[i / MapChunk::kCapacity];
    return {c.embeddings.data() + (i % MapChunk::kCapacity) * dim_, dim_};
  }
  PointEntry entry(std::size_t i) const;

  /// Writable access to confidence and embedding of point i.
  struct Mutable {
    float& confidence;
    std::span<float> embedding;
  };
  Mutable mutate(std::size_t i);

  /// Appends a point and indexes it. `embedding` must have dim() entries.
  void append(const Eigen::Vector3f& position, std::span<const float> embedding,
              float confidence, const Rgb8& color);
  void append(const PointEntry& e) { append(e.position, e.embedding, e.confidence, e.color); }

  /// Drops all points, keeping configuration.
  void clear();

  MapSnapshot snapshot() const;

 private:
  MapChunk& writable_chunk(std::size_t c);

  std::uint32_t dim_;
  std::size_t budget_;
  double voxel_size_;
  std::vector<std::shared_ptr<MapChunk>> chunks_;
  std::size_t size_ = 0;
  VoxelIndex index_;
};

}  // namespace vlmap
