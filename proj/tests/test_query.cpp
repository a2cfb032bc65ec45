#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vlmap/errors.hpp"
#include "vlmap/query.hpp"

using namespace vlmap;

namespace {

MapSnapshot map_of(const std::vector<std::vector<float>>& embeddings) {
  MapConfig c;
  c.dim = static_cast<std::uint32_t>(embeddings.front().size());
  EmbeddingMap map(c);
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    map.append({float(i), 0, 0}, embeddings[i], 1, Rgb8(0, 0, 0));
  return map.snapshot();
}

QueryEmbedding q(std::string label, std::vector<float> e) { return {std::move(label), std::move(e)}; }

}  // namespace

TEST_CASE("heatmap endpoints") {
  const MapSnapshot m = map_of({{1, 0}, {-1, 0}, {0, 1}});
  const auto h = heatmap(m, q("a", {1, 0}));
  CHECK(h[0] == 1.0f);
  CHECK(h[1] == 0.0f);
  CHECK(h[2] == 0.5f);
  CHECK_THROWS_AS(heatmap(m, q("bad", {1, 0, 0})), InputError);
}

TEST_CASE("TXTQ round trip") {
  const std::vector<QueryEmbedding> qs{q("mug", {0.6f, 0.8f}), q("object", {1, 0})};
  CHECK(parse_txtq(emit_txtq(qs)) == qs);
  auto bytes = emit_txtq(qs);
  bytes.pop_back();
  CHECK_THROWS_AS(parse_txtq(bytes), FormatError);
}

TEST_CASE("partition: pairwise argmax against the object query") {
  // Object similarity 0.5 everywhere; query 0.9 on half, 0.1 on the rest.
  const float a = 0.8f, b = std::sqrt(1 - a * a);
  std::vector<std::vector<float>> e;
  for (int i = 0; i < 10; ++i) e.push_back(i % 2 ? std::vector<float>{-a, b, 0} : std::vector<float>{a, b, 0});
  const MapSnapshot m = map_of(e);
  const QueryResult r = partition(m, std::vector{q("t", {1, 0, 0})}, q("object", {0, 0, 1}));
  REQUIRE(r.sets.size() == 1);
  CHECK(r.sets[0].ids == std::vector<std::uint32_t>{0, 2, 4, 6, 8});
  CHECK(r.discarded == std::vector<std::uint32_t>{1, 3, 5, 7, 9});

  const QueryResult none = partition(m, std::vector{q("t", {0, 0, 1})}, q("object", {0, 1, 0}));
  CHECK(none.sets[0].ids.empty());
}

TEST_CASE("partition ties favour task queries, then the lower index") {
  const MapSnapshot m = map_of({{1, 0}, {0, 1}});
  const QueryResult r = partition(m, std::vector{q("a", {1, 0}), q("b", {1, 0})}, q("object", {1, 0}));
  CHECK(r.sets[0].ids == std::vector<std::uint32_t>{0, 1});
  CHECK(r.sets[1].ids.empty());
}

TEST_CASE("GMM: three blobs keep exactly the high one") {
  std::mt19937 rng(3);
  std::normal_distribution<double> noise(0, 0.01);
  std::vector<double> v;
  for (double c : {0.1, 0.5, 0.9})
    for (int i = 0; i < 100; ++i) v.push_back(c + noise(rng));
  std::shuffle(v.begin(), v.end(), rng);
  const auto keep = gmm_filter(v);
  std::vector<std::size_t> want;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > 0.7) want.push_back(i);
  CHECK(keep == want);
  const GmmFit fit = fit_gmm3(v);
  for (std::size_t k = 1; k < fit.log_likelihood.size(); ++k)
    CHECK(fit.log_likelihood[k] >= fit.log_likelihood[k - 1] - 1e-9);
}

TEST_CASE("GMM degenerate inputs") {
  const std::vector<double> same(5, 0.4);
  CHECK(gmm_filter(same).size() == 5);
  const std::vector<double> three{0.0, 1.0, 0.99};
  const auto keep = gmm_filter(three);
  CHECK(std::find(keep.begin(), keep.end(), 1) != keep.end());
  CHECK(std::find(keep.begin(), keep.end(), 2) != keep.end());
  // Float rounding around a single value keeps everything.
  std::vector<double> ulp(50, 1.0);
  for (std::size_t i = 0; i < ulp.size(); i += 3) ulp[i] = std::nextafter(1.0f, 0.0f);
  CHECK(gmm_filter(ulp).size() == ulp.size());
}

TEST_CASE("DBSCAN: two clusters with outliers") {
  std::mt19937 rng(9);
  std::normal_distribution<float> n(0, 0.001f);
  std::vector<Eigen::Vector3f> pts;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 50; ++i) pts.emplace_back(c + n(rng), n(rng), n(rng));
  for (int i = 0; i < 5; ++i) pts.emplace_back(0.5f, 0.3f * i, 5.0f);
  const auto keep = dbscan_filter(pts, 0.01, 5);
  CHECK(keep.size() == 100);
  CHECK(keep.back() == 99);
  CHECK(dbscan_filter(pts, 0.01, 5, true).size() == 50);
  CHECK(dbscan_filter(std::vector<Eigen::Vector3f>(pts.begin(), pts.begin() + 4), 0.01, 5).empty());
}

TEST_CASE("DBSCAN agrees with the naive reference") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_real_distribution<float> u(0, 0.2f);
    std::vector<Eigen::Vector3f> pts(1 + rng() % 200);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng) * 0.2f};
    std::vector<char> core;
    const auto want = oracle::dbscan(pts, 0.02, 4, &core);
    const DbscanResult got = dbscan(pts, 0.02, 4);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK((got.labels[i] < 0) == (want[i] < 0));
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t j = 0; j < pts.size(); ++j)
        if (core[i] && core[j]) CHECK((got.labels[i] == got.labels[j]) == (want[i] == want[j]));
  }
}

TEST_CASE("segment_3d on an empty map") {
  MapConfig c;
  c.dim = 2;
  const EmbeddingMap empty(c);
  const QueryResult r = segment_3d(empty.snapshot(), std::vector{q("a", {1, 0})}, q("object", {0, 1}));
  REQUIRE(r.sets.size() == 1);
  CHECK(r.sets[0].ids.empty());
}
