#include "vlmap/embedding_map.hpp"

#include "vlmap/errors.hpp"

namespace vlmap {

MapChunk::MapChunk(std::uint32_t d) : dim(d) {
  positions.reserve(kCapacity);
  confidences.reserve(kCapacity);
  colors.reserve(kCapacity);
  embeddings.reserve(kCapacity * d);
}

PointEntry MapSnapshot::entry(std::size_t i) const {
  const auto e = embedding(i);
  return {position(i), {e.begin(), e.end()}, confidence(i), color(i)};
}

EmbeddingMap::EmbeddingMap(const MapConfig& config)
    : dim_(config.dim), budget_(config.budget), voxel_size_(config.voxel_size),
      index_(config.index_cell) {
  if (config.dim == 0) throw InputError("map embedding dimension must be positive");
  if (config.budget == 0) throw InputError("map budget must be positive");
  if (!(config.voxel_size > 0) || !(config.index_cell > 0))
    throw InputError("map voxel and index cell sizes must be positive");
}

void EmbeddingMap::set_index_cell(double cell) {
  if (!(cell > 0)) throw InputError("index cell size must be positive");
  if (cell == index_.cell_size()) return;
  index_ = VoxelIndex(cell);
  for (std::size_t i = 0; i < size_; ++i) index_.insert(static_cast<std::uint32_t>(i), position(i));
}

PointEntry EmbeddingMap::entry(std::size_t i) const {
  const auto e = embedding(i);
  return {position(i), {e.begin(), e.end()}, confidence(i), color(i)};
}

MapChunk& EmbeddingMap::writable_chunk(std::size_t c) {
  auto& chunk = chunks_[c];
  if (chunk.use_count() > 1) chunk = std::make_shared<MapChunk>(*chunk);
  return *chunk;
}

EmbeddingMap::Mutable EmbeddingMap::mutate(std::size_t i) {
  MapChunk& c = writable_chunk(i / MapChunk::kCapacity);
  const std::size_t off = i % MapChunk::kCapacity;
  return {c.confidences[off], {c.embeddings.data() + off * dim_, dim_}};
}

void EmbeddingMap::append(const Eigen::Vector3f& position, std::span<const float> embedding,
                          float confidence, const Rgb8& color) {
  if (embedding.size() != dim_)
    throw InputError("append: embedding has " + std::to_string(embedding.size()) +
                     " entries, map dimension is " + std::to_string(dim_));
  if (size_ > std::numeric_limits<std::uint32_t>::max() - 1)
    throw CapacityError("map exceeds 2^32 points");
  if (chunks_.empty() || chunks_.back()->full()) chunks_.push_back(std::make_shared<MapChunk>(dim_));
  MapChunk& c = writable_chunk(chunks_.size() - 1);
  c.positions.push_back(position);
  c.confidences.push_back(confidence);
  c.colors.push_back(color);
  c.embeddings.insert(c.embeddings.end(), embedding.begin(), embedding.end());
  index_.insert(static_cast<std::uint32_t>(size_), position);
  ++size_;
}

void EmbeddingMap::clear() {
  chunks_.clear();
  size_ = 0;
  index_.clear();
}

MapSnapshot EmbeddingMap::snapshot() const {
  MapSnapshot snap;
  snap.chunks_.assign(chunks_.begin(), chunks_.end());
  snap.size_ = size_;
  snap.dim_ = dim_;
  return snap;
}

}  // namespace vlmap
