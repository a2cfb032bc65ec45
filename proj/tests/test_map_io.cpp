#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "vlmap/errors.hpp"
#include "vlmap/map_io.hpp"

using namespace vlmap;

namespace {

EmbeddingMap random_map(std::size_t n, std::uint32_t dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  MapConfig c;
  c.dim = dim;
  EmbeddingMap map(c);
  std::vector<float> e(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0;
    for (auto& x : e) {
      x = u(rng);
      norm += double(x) * x;
    }
    for (auto& x : e) x = float(x / std::sqrt(norm));
    map.append({u(rng), u(rng), u(rng)}, e, (u(rng) + 1) / 2,
               Rgb8(std::uint8_t(rng() % 256), std::uint8_t(rng() % 256), std::uint8_t(rng() % 256)));
  }
  return map;
}

std::string emap_bytes(const EmbeddingMap& map) {
  std::ostringstream out;
  write_emap(out, map.snapshot());
  return out.str();
}

}  // namespace

TEST_CASE("EMAP round trips") {
  for (std::size_t n : {std::size_t{0}, std::size_t{1000}, std::size_t{5000}}) {
    const EmbeddingMap map = random_map(n, 8, 3);
    const std::string bytes = emap_bytes(map);
    std::istringstream in(bytes);
    const EmbeddingMap back = read_emap(in);
    REQUIRE(back.size() == n);
    CHECK(back.dim() == 8);
    CHECK(emap_bytes(back) == bytes);
  }
}

TEST_CASE("EMAP corruption is a format error") {
  const std::string bytes = emap_bytes(random_map(10, 4, 1));
  auto reject = [](std::string b) {
    std::istringstream in(b);
    CHECK_THROWS_AS(read_emap(in), FormatError);
  };
  reject(bytes.substr(0, bytes.size() - 3));
  reject(bytes + "x");
  std::string magic = bytes;
  magic[0] ^= 0x20;
  reject(magic);
  // Inflate the point count field wherever the value 10 is stored.
  for (std::size_t off = 0; off + 8 <= 32; ++off) {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + off, 8);
    if (v == 10) {
      std::string b = bytes;
      v = 1ull << 40;
      std::memcpy(b.data() + off, &v, 8);
      reject(b);
    }
  }
}

TEST_CASE("PLY export parses back") {
  const EmbeddingMap map = random_map(50, 4, 7);
  const MapSnapshot snap = map.snapshot();
  for (PlyFormat f : {PlyFormat::ascii, PlyFormat::binary_little_endian}) {
    const auto verts = oracle::read_ply(export_ply(snap, std::nullopt, f));
    REQUIRE(verts.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
      CHECK(verts[i].r == snap.color(i).x());
      CHECK(verts[i].b == snap.color(i).z());
      if (f == PlyFormat::binary_little_endian) CHECK(verts[i].x == snap.position(i).x());
    }
  }
  std::vector<float> sim(50, 0.0f);
  sim[1] = 1.0f;
  const auto heat = oracle::read_ply(export_ply(snap, std::span<const float>(sim), PlyFormat::ascii));
  CHECK((heat[0].r == 0 && heat[0].g == 0 && heat[0].b == 255));
  CHECK((heat[1].r == 255 && heat[1].g == 0 && heat[1].b == 0));
  const std::vector<float> short_sim(3, 0.5f);
  CHECK_THROWS_AS(export_ply(snap, std::span<const float>(short_sim)), InputError);
}
