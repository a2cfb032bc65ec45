#include "vlmap/map_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "vlmap/errors.hpp"

namespace vlmap {

namespace {

constexpr std::string_view kMagic = "EMAP";
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 2 + 8 + 4;

std::size_t record_size(std::uint32_t dim) { return 16 + 4 * std::size_t{dim} + 3; }

}  // namespace

void write_emap(std::ostream& out, const MapSnapshot& map) {
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.put(kVersion);
  w.put(static_cast<std::uint64_t>(map.size()));
  w.put(map.dim());
  for (const auto& chunk : map.chunks()) {
    for (std::size_t j = 0; j < chunk->size(); ++j) {
      const auto& p = chunk->positions[j];
      w.put_f32(p.x());
      w.put_f32(p.y());
      w.put_f32(p.z());
      w.put_f32(chunk->confidences[j]);
      w.put_f32s({chunk->embeddings.data() + j * map.dim(), map.dim()});
      for (int k = 0; k < 3; ++k) w.put(chunk->colors[j][k]);
    }
    auto& buf = w.buffer();
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    buf.clear();
  }
  auto& buf = w.buffer();
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw InputError("EMAP write failed");
}

void save_map(const std::filesystem::path& path, const MapSnapshot& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  write_emap(out, map);
}

EmbeddingMap read_emap(std::istream& in, MapConfig config) {
  char header[kHeaderSize];
  in.read(header, kHeaderSize);
  const auto got = static_cast<std::size_t>(in.gcount());
  detail::ByteReader h(std::span<const char>(header, got));
  if (h.bytes(4, "magic") != kMagic) throw FormatError("bad EMAP magic", 0);
  const auto version = h.get<std::uint16_t>("version");
  if (version != kVersion) throw FormatError("unsupported EMAP version " + std::to_string(version), 4);
  const auto count = h.get<std::uint64_t>("point count");
  const auto dim = h.get<std::uint32_t>("embedding dimension");
  if (dim == 0) throw FormatError("EMAP embedding dimension is 0", 14);

  // Check the payload length against the count before allocating anything.
  const auto start = in.tellg();
  if (start != std::istream::pos_type(-1)) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(start);
    const auto available = static_cast<std::uint64_t>(end - start);
    const std::uint64_t rec = record_size(dim);
    if (count > available / rec || count * rec != available)
      throw FormatError("EMAP point count " + std::to_string(count) + " inconsistent with " +
                            std::to_string(available) + " payload bytes of " + std::to_string(rec) + " per point",
                        6);
  }

  config.dim = dim;
  config.budget = std::max<std::size_t>(config.budget, count);
  EmbeddingMap map(config);
  std::vector<char> rec(record_size(dim));
  std::vector<float> emb(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t offset = kHeaderSize + i * rec.size();
    in.read(rec.data(), static_cast<std::streamsize>(rec.size()));
    if (static_cast<std::size_t>(in.gcount()) != rec.size())
      throw FormatError("truncated EMAP point " + std::to_string(i), offset + static_cast<std::size_t>(in.gcount()));
    detail::ByteReader r(rec);
    Eigen::Vector3f p;
    p.x() = r.get_f32("position");
    p.y() = r.get_f32("position");
    p.z() = r.get_f32("position");
    const float conf = r.get_f32("confidence");
    r.get_f32s(emb, "embedding");
    Rgb8 color;
    for (int k = 0; k < 3; ++k) color[k] = r.get<std::uint8_t>("colour");
    if (!p.allFinite() || !(conf >= 0.0f && conf <= 1.0f))
      throw DataError("EMAP point " + std::to_string(i) + " has a non-finite position or confidence outside [0,1]");
    map.append(p, emb, conf, color);
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after EMAP payload", kHeaderSize + count * rec.size());
  return map;
}

EmbeddingMap load_map(const std::filesystem::path& path, MapConfig config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return read_emap(in, config);
}

Rgb8 jet_color(double s) {
  s = std::clamp(std::isfinite(s) ? s : 0.0, 0.0, 1.0);
  double r, g, b;
  if (s < 0.25) r = 0, g = 4 * s, b = 1;
  else if (s < 0.5) r = 0, g = 1, b = 1 - 4 * (s - 0.25);
  else if (s < 0.75) r = 4 * (s - 0.5), g = 1, b = 0;
  else r = 1, g = 1 - 4 * (s - 0.75), b = 0;
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
  return {to8(r), to8(g), to8(b)};
}

std::string export_ply(const MapSnapshot& map, std::optional<std::span<const float>> similarity, PlyFormat format) {
  if (similarity && similarity->size() != map.size())
    throw InputError("export_ply: " + std::to_string(similarity->size()) + " similarities for " +
                     std::to_string(map.size()) + " points");
  std::ostringstream out;
  out << "ply\nformat " << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << map.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  detail::ByteWriter w;
  out.precision(9);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const auto& p = map.position(i);
    const Rgb8 c = similarity ? jet_color((*similarity)[i]) : map.color(i);
    if (format == PlyFormat::ascii) {
      out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2])
          << '\n';
    } else {
      w.put_f32(p.x());
      w.put_f32(p.y());
      w.put_f32(p.z());
      for (int k = 0; k < 3; ++k) w.put(c[k]);
    }
  }
  std::string s = out.str();
  const auto& buf = w.buffer();
  s.append(buf.begin(), buf.end());
  return s;
}

void save_ply(const std::filesystem::path& path, const MapSnapshot& map,
              std::optional<std::span<const float>> similarity, PlyFormat format) {
  const std::string bytes = export_ply(map, similarity, format);
  detail::write_file(path.string(), bytes);
}

}  // namespace vlmap
