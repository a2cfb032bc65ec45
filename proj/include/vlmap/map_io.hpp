#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "vlmap/embedding_map.hpp"

namespace vlmap {

/// EMAP v1 little-endian snapshot writer.
void write_emap(std::ostream& out, const MapSnapshot& map);
void save_map(const std::filesystem::path& path, const MapSnapshot& map);

/// Reads EMAP v1 into a fresh map configured by `config` (its dim is
/// replaced by the file's). Throws FormatError on bad magic, version,
/// truncation or trailing data; nothing is returned on failure.
EmbeddingMap read_emap(std::istream& in, MapConfig config = {});
EmbeddingMap load_map(const std::filesystem::path& path, MapConfig config = {});

enum class PlyFormat { ascii, binary_little_endian };

/// Blue (0) to red (1) jet-style ramp.
Rgb8 jet_color(double s);

/// PLY with x, y, z, red, green, blue per point. Colours come from the map,
/// or from `jet_color` over `similarity` when given (length must match).
std::string export_ply(const MapSnapshot& map, std::optional<std::span<const float>> similarity = std::nullopt,
                       PlyFormat format = PlyFormat::binary_little_endian);
void save_ply(const std::filesystem::path& path, const MapSnapshot& map,
              std::optional<std::span<const float>> similarity = std::nullopt,
              PlyFormat format = PlyFormat::binary_little_endian);

}  // namespace vlmap
