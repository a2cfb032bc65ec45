#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "vlmap/image.hpp"

namespace vlmap {

/// One segment: a pixel rectangle, its binary mask and a unit embedding.
struct SegmentRecord {
  std::uint32_t u = 0, v = 0;          // top-left corner
  std::uint32_t width = 0, height = 0;  // r_w, r_h
  std::vector<std::uint8_t> mask;       // width * height, row-major, 0/1
  std::vector<float> embedding;

  bool foreground(std::uint32_t x, std::uint32_t y) const { return mask[y * width + x] != 0; }
  std::size_t foreground_count() const;

  bool operator==(const SegmentRecord&) const = default;
};

struct EmbeddingFrame {
  std::uint32_t frame_index = 0;
  std::uint32_t width = 0, height = 0;
  std::uint32_t dim = 0;
  std::vector<SegmentRecord> segments;

  bool operator==(const EmbeddingFrame&) const = default;
};

/// Decodes SEGB v1. Embeddings within 1e-3 of unit norm are renormalised,
/// others raise DataError. Structural problems raise FormatError.
EmbeddingFrame parse_segb(std::span<const char> bytes);
EmbeddingFrame load_segb(const std::filesystem::path& path);

/// Encodes SEGB v1.
std::vector<char> emit_segb(const EmbeddingFrame& ef);
void save_segb(const std::filesystem::path& path, const EmbeddingFrame& ef);

/// Mask run lengths, alternating background/foreground, starting with
/// background.
std::vector<std::uint32_t> encode_runs(std::span<const std::uint8_t> mask);

/// Per-pixel segment assignment. The dense per-pixel embedding image is never
/// materialised; pixels resolve to a segment whose embedding is shared.
class PixelLookup {
 public:
  static constexpr std::int32_t kNone = -1;

  PixelLookup() = default;
  PixelLookup(Image<std::int32_t> ids, std::uint32_t dim, std::vector<float> embeddings);

  int width() const { return ids_.width(); }
  int height() const { return ids_.height(); }
  std::uint32_t dim() const { return dim_; }
  std::size_t segment_count() const { return dim_ ? embeddings_.size() / dim_ : 0; }

  std::int32_t segment(int u, int v) const { return ids_(u, v); }
  std::span<const float> segment_embedding(std::int32_t id) const {
    return {embeddings_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  /// Embedding at pixel (u, v), or nullopt when no segment covers it.
  std::optional<std::span<const float>> at(int u, int v) const {
    const auto id = ids_(u, v);
    if (id == kNone) return std::nullopt;
    return segment_embedding(id);
  }
  const Image<std::int32_t>& ids() const { return ids_; }

  bool operator==(const PixelLookup&) const = default;

 private:
  Image<std::int32_t> ids_;
  std::uint32_t dim_ = 0;
  std::vector<float> embeddings_;
};

/// Resolves overlaps in favour of the segment with the fewest foreground
/// pixels, then the lower segment index.
PixelLookup assemble_lookup(const EmbeddingFrame& ef);

}  // namespace vlmap
