#include "vlmap/segments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "binary_io.hpp"
#include "vlmap/errors.hpp"

namespace vlmap {

namespace detail {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace detail

namespace {

constexpr std::string_view kMagic = "SEGB";
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::size_t SegmentRecord::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

std::vector<std::uint32_t> encode_runs(std::span<const std::uint8_t> mask) {
  std::vector<std::uint32_t> runs;
  std::uint8_t state = 0;
  std::uint32_t run = 0;
  for (const auto m : mask) {
    const std::uint8_t bit = m ? 1 : 0;
    if (bit != state) {
      runs.push_back(run);
      run = 0;
      state = bit;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

EmbeddingFrame parse_segb(std::span<const char> bytes) {
  detail::ByteReader in(bytes);
  if (in.bytes(4, "magic") != kMagic) throw FormatError("bad SEGB magic", 0);
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion)
    throw FormatError("unsupported SEGB version " + std::to_string(version), 4);

  EmbeddingFrame ef;
  ef.frame_index = in.get<std::uint32_t>("frame index");
  ef.width = in.get<std::uint32_t>("width");
  ef.height = in.get<std::uint32_t>("height");
  ef.dim = in.get<std::uint32_t>("embedding dimension");
  const auto count = in.get<std::uint32_t>("segment count");
  if (ef.dim == 0 && count > 0) throw FormatError("SEGB embedding dimension is 0", in.offset());

  ef.segments.reserve(std::min<std::size_t>(count, in.remaining() / 24 + 1));
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string ctx = "segment " + std::to_string(k);
    SegmentRecord seg;
    const std::size_t seg_offset = in.offset();
    seg.u = in.get<std::uint32_t>(ctx + " bbox");
    seg.v = in.get<std::uint32_t>(ctx + " bbox");
    seg.width = in.get<std::uint32_t>(ctx + " bbox");
    seg.height = in.get<std::uint32_t>(ctx + " bbox");
    if (seg.width == 0 || seg.height == 0 ||
        std::uint64_t{seg.u} + seg.width > ef.width ||
        std::uint64_t{seg.v} + seg.height > ef.height)
      throw FormatError(ctx + " bbox outside " + std::to_string(ef.width) + "x" +
                            std::to_string(ef.height) + " image",
                        seg_offset);

    const auto nruns = in.get<std::uint32_t>(ctx + " run count");
    in.require(std::size_t{nruns} * 4, ctx + " mask runs");
    const std::uint64_t area = std::uint64_t{seg.width} * seg.height;
    seg.mask.reserve(area);
    std::uint64_t total = 0;
    for (std::uint32_t r = 0; r < nruns; ++r) {
      const auto run = in.get<std::uint32_t>(ctx + " mask runs");
      total += run;
      if (total > area)
        throw FormatError(ctx + " mask runs exceed bbox area " + std::to_string(area), in.offset());
      seg.mask.insert(seg.mask.end(), run, static_cast<std::uint8_t>(r % 2));
    }
    if (total != area)
      throw FormatError(ctx + " mask runs sum to " + std::to_string(total) + ", expected " +
                            std::to_string(area),
                        in.offset());
    if (seg.foreground_count() == 0) throw DataError(ctx + " mask has no foreground pixel");

    seg.embedding.resize(ef.dim);
    in.get_f32s(seg.embedding, ctx + " embedding");
    double sq = 0;
    for (float x : seg.embedding) sq += double(x) * x;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-3)
      throw DataError(ctx + " embedding norm " + std::to_string(norm) + " is not unit");
    if (std::abs(norm - 1.0) > 1e-6)
      for (float& x : seg.embedding) x = static_cast<float>(x / norm);
    ef.segments.push_back(std::move(seg));
  }
  if (in.remaining() != 0)
    throw FormatError(std::to_string(in.remaining()) + " trailing bytes after SEGB payload",
                      in.offset());
  return ef;
}

EmbeddingFrame load_segb(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  return parse_segb(bytes);
}

std::vector<char> emit_segb(const EmbeddingFrame& ef) {
  detail::ByteWriter out;
  out.bytes(kMagic);
  out.put(kVersion);
  out.put(ef.frame_index);
  out.put(ef.width);
  out.put(ef.height);
  out.put(ef.dim);
  out.put(static_cast<std::uint32_t>(ef.segments.size()));
  for (const auto& seg : ef.segments) {
    if (seg.embedding.size() != ef.dim) throw InputError("emit_segb: embedding size differs from d");
    if (seg.mask.size() != std::size_t{seg.width} * seg.height)
      throw InputError("emit_segb: mask size differs from bbox area");
    out.put(seg.u);
    out.put(seg.v);
    out.put(seg.width);
    out.put(seg.height);
    const auto runs = encode_runs(seg.mask);
    out.put(static_cast<std::uint32_t>(runs.size()));
    for (auto r : runs) out.put(r);
    out.put_f32s(seg.embedding);
  }
  return out.take();
}

void save_segb(const std::filesystem::path& path, const EmbeddingFrame& ef) {
  detail::write_file(path.string(), emit_segb(ef));
}

PixelLookup::PixelLookup(Image<std::int32_t> ids, std::uint32_t dim, std::vector<float> embeddings)
    : ids_(std::move(ids)), dim_(dim), embeddings_(std::move(embeddings)) {}

PixelLookup assemble_lookup(const EmbeddingFrame& ef) {
  Image<std::int32_t> ids(static_cast<int>(ef.width), static_cast<int>(ef.height),
                          PixelLookup::kNone);
  std::vector<std::size_t> area(ef.segments.size());
  std::vector<float> embeddings;
  embeddings.reserve(ef.segments.size() * ef.dim);
  for (std::size_t k = 0; k < ef.segments.size(); ++k) {
    area[k] = ef.segments[k].foreground_count();
    embeddings.insert(embeddings.end(), ef.segments[k].embedding.begin(),
                      ef.segments[k].embedding.end());
  }
  for (std::size_t k = 0; k < ef.segments.size(); ++k) {
    const auto& seg = ef.segments[k];
    for (std::uint32_t y = 0; y < seg.height; ++y) {
      for (std::uint32_t x = 0; x < seg.width; ++x) {
        if (!seg.foreground(x, y)) continue;
        auto& cur = ids(static_cast<int>(seg.u + x), static_cast<int>(seg.v + y));
        // Segments are visited in index order, so a tie keeps the earlier one.
        if (cur == PixelLookup::kNone || area[k] < area[static_cast<std::size_t>(cur)])
          cur = static_cast<std::int32_t>(k);
      }
    }
  }
  return PixelLookup(std::move(ids), ef.dim, std::move(embeddings));
}

}  // namespace vlmap
