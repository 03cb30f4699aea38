// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "scdm/errors.hpp"
#include "scdm/io_util.hpp"
#include "scdm/labelmap.hpp"
#include "test_support.hpp"

using namespace scdm;
using scdm::testing::TempDir;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header, std::initializer_list<std::uint16_t> cells) {
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (auto c : cells) {
    out.push_back(static_cast<std::uint8_t>(c & 0xff));
    out.push_back(static_cast<std::uint8_t>(c >> 8));
  }
  return out;
}

SemanticMap map_of(int h, int w, int C, std::initializer_list<int> cells) {
  SemanticMap m(h, w, C);
  Eigen::Index k = 0;
  for (int v : cells) m.set_flat(k++, static_cast<ClassId>(v));
  return m;
}

}  // namespace

TEST_CASE("SLM1 smallest file decodes") {
  const SemanticMap m = decode_map(bytes_of("SLM1\n1 1 3\n", {2}));
  CHECK(m.height() == 1);
  CHECK(m.width() == 1);
  CHECK(m.num_classes() == 3);
  CHECK(m(0, 0) == 2);
}

TEST_CASE("SLM1 decode errors") {
  CHECK_THROWS_AS(decode_map(bytes_of("SLM1\n1 1 3\n", {5})), CorruptDataError);
  CHECK_THROWS_AS(decode_map(bytes_of("SLM2\n1 1 3\n", {0})), FormatError);
  CHECK_THROWS_AS(decode_map(bytes_of("SLM1\n2 1 3\n", {0})), TruncatedError);
  CHECK_THROWS_AS(decode_map(bytes_of("SLM1\n1 1 3\n", {0, 0})), FormatError);
  CHECK_THROWS_AS(decode_map(bytes_of("SLM1\n1 x 3\n", {0})), FormatError);
  CHECK_THROWS_AS(decode_map(bytes_of("SLM1\n0 1 3\n", {})), FormatError);
  auto partial = bytes_of("SLM1\n1 1 3\n", {1});
  partial.pop_back();
  CHECK_THROWS_AS(decode_map(partial), TruncatedError);
}

TEST_CASE("MASK is stored as C") {
  const SemanticMap m = SemanticMap::all_masked(1, 1, 3);
  CHECK(encode_map(m) == bytes_of("SLM1\n1 1 3\n", {3}));
}

TEST_CASE("cells outside 0..C are rejected at construction") {
  SemanticMap m(2, 2, 3);
  CHECK_THROWS_AS(m.set(0, 0, 4), ArgumentError);
  CHECK_NOTHROW(m.set(0, 0, 3));
  CHECK_THROWS_AS(SemanticMap(0, 2, 3), ArgumentError);
}

TEST_CASE("SLM1 save/load round trip on random maps") {
  TempDir dir;
  CounterStream rng(5, "test.slm");
  for (int i = 0; i < 50; ++i) {
    const int C = 1 + static_cast<int>(rng.below(300));
    const SemanticMap m = testing::random_map(16, 16, C, rng, true);
    const auto path = dir / ("m" + std::to_string(i) + ".slm");
    save_map(m, path);
    const SemanticMap back = load_map(path);
    CHECK(back == m);
    const auto first = read_bytes(path);
    save_map(back, path);
    CHECK(read_bytes(path) == first);
  }
}

TEST_CASE("saving to an unwritable path is an I/O error") {
  CHECK_THROWS_AS(save_map(SemanticMap(1, 1, 2), "/nonexistent-dir/x.slm"), IoError);
  CHECK_THROWS_AS(load_map("/nonexistent-dir/x.slm"), IoError);
}

TEST_CASE("miou hand examples") {
  const auto pred = map_of(2, 2, 2, {0, 0, 1, 1});
  const auto truth = map_of(2, 2, 2, {0, 1, 1, 1});
  CHECK(miou(pred, truth) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(miou(truth, truth) == 1.0);
  CHECK(miou(map_of(2, 2, 2, {0, 0, 0, 0}), map_of(2, 2, 2, {1, 1, 1, 1})) == 0.0);
  CHECK_THROWS_AS(miou(SemanticMap(2, 3, 2), SemanticMap(3, 2, 2)), ArgumentError);
}

TEST_CASE("miou ignore class and MASK handling") {
  const auto pred = map_of(2, 2, 3, {0, 2, 1, 1});
  const auto truth = map_of(2, 2, 3, {0, 2, 1, 2});
  // ignoring class 2 drops pixels whose truth is 2: classes 0 and 1 are perfect.
  CHECK(miou(pred, truth, 2) == 1.0);
  const auto masked = map_of(1, 2, 2, {2, 0});
  CHECK_THROWS_AS(miou(masked, map_of(1, 2, 2, {0, 0})), ArgumentError);
  CHECK(miou(masked, map_of(1, 2, 2, {2, 0}), 2) == 1.0);
}

TEST_CASE("miou is symmetric for equal class sets and 1 on itself") {
  CounterStream rng(9, "test.miou");
  for (int i = 0; i < 20; ++i) {
    const auto a = testing::random_map(8, 8, 3, rng);
    const auto b = testing::random_map(8, 8, 3, rng);
    CHECK(miou(a, a) == 1.0);
    CHECK(miou(a, b) == doctest::Approx(miou(b, a)).epsilon(1e-15));
  }
}

TEST_CASE("stats: two-map hand example") {
  const std::vector<SemanticMap> corpus = {map_of(2, 2, 2, {0, 0, 0, 0}), map_of(2, 2, 2, {0, 0, 1, 1})};
  const ClassStats s = estimate_stats(corpus);
  CHECK(s.psi[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.phi[1] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // class 0: mean fraction (1 + 0.5) / 2
  CHECK(s.psi[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(s.phi[0] == 0.0);
}

TEST_CASE("stats: one-class corpus and clamping") {
  const std::vector<SemanticMap> corpus = {SemanticMap(3, 3, 1, 0)};
  const ClassStats s = estimate_stats(corpus);
  CHECK(s.psi[0] == 1.0);
  CHECK(s.phi[0] == 0.0);
  StatsOptions o;
  o.clamp_phi = true;
  const ClassStats c = estimate_stats(corpus, o);
  CHECK(c.phi[0] == 1.0);
  CHECK(c.phi_clamped);
}

TEST_CASE("stats: absent classes get the largest observed product") {
  const std::vector<SemanticMap> corpus = {map_of(2, 2, 3, {0, 0, 0, 1}), map_of(2, 2, 3, {0, 0, 0, 0})};
  const ClassStats s = estimate_stats(corpus);
  CHECK_FALSE(s.present[2]);
  const double largest = std::max(s.product(0), s.product(1));
  CHECK(s.product(2) == doctest::Approx(largest).epsilon(1e-15));
  CHECK(s.phi[2] == 1.0);
}

TEST_CASE("stats: target minimum product rescales psi") {
  CounterStream rng(1, "test.stats.target");
  std::vector<SemanticMap> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(testing::random_map(6, 6, 4, rng));
  corpus.push_back(SemanticMap(6, 6, 4, 0));
  StatsOptions o;
  o.clamp_phi = true;
  o.target_min_product = 5.0;
  const ClassStats s = estimate_stats(corpus, o);
  const auto p = s.products();
  CHECK(*std::min_element(p.begin(), p.end()) == doctest::Approx(5.0).epsilon(1e-12));
  REQUIRE(s.scale_factor);
  const ClassStats raw = estimate_stats(corpus, StatsOptions{true, std::nullopt, std::nullopt});
  for (int c = 0; c < 4; ++c) CHECK(s.psi[c] == doctest::Approx(raw.psi[c] * *s.scale_factor).epsilon(1e-14));
}

TEST_CASE("stats: permutation invariant and psi >= 1") {
  CounterStream rng(2, "test.stats.perm");
  std::vector<SemanticMap> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(testing::random_map(5, 7, 6, rng));
  const ClassStats a = estimate_stats(corpus);
  std::reverse(corpus.begin(), corpus.end());
  std::rotate(corpus.begin(), corpus.begin() + 13, corpus.end());
  const ClassStats b = estimate_stats(corpus);
  for (int c = 0; c < 6; ++c) {
    CHECK(a.psi[c] == b.psi[c]);
    CHECK(a.phi[c] == b.phi[c]);
    if (a.present[c]) CHECK(a.psi[c] >= 1.0);
  }
}

TEST_CASE("stats: argument errors") {
  CHECK_THROWS_AS(estimate_stats(std::vector<SemanticMap>{}), ArgumentError);
  const std::vector<SemanticMap> masked = {SemanticMap::all_masked(2, 2, 2)};
  CHECK_THROWS_AS(estimate_stats(masked), ArgumentError);
  const std::vector<SemanticMap> mixed = {SemanticMap(2, 2, 2), SemanticMap(2, 2, 3)};
  CHECK_THROWS_AS(estimate_stats(mixed), ArgumentError);
}

TEST_CASE("stats JSON round trip") {
  TempDir dir;
  const std::vector<SemanticMap> corpus = {map_of(2, 2, 3, {0, 1, 1, 2}), map_of(2, 2, 3, {0, 0, 0, 1})};
  StatsOptions o;
  o.unlabeled_class = 0;
  o.clamp_phi = true;
  o.target_min_product = 3.0;
  const ClassStats s = estimate_stats(corpus, o);
  save_stats(s, dir / "stats.json");
  const ClassStats back = load_stats(dir / "stats.json");
  CHECK(back.psi == s.psi);
  CHECK(back.phi == s.phi);
  CHECK(back.unlabeled_class == s.unlabeled_class);
  CHECK(back.scale_factor == s.scale_factor);
  CHECK(back.present == s.present);
  CHECK_THROWS_AS(stats_from_json("{\"version\":1}"), FormatError);
  CHECK_THROWS_AS(stats_from_json("not json"), FormatError);
}
