// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "scdm/corrupt.hpp"
#include "scdm/errors.hpp"
#include "test_support.hpp"

using namespace scdm;
using scdm::testing::random_map;
using scdm::testing::within_binomial;

namespace {

// Exhaustive: cell p is relabelled iff some edge cell q lies within the
// metric ball around p. Edge cells are found by scanning all 4-neighbours.
SemanticMap edge_oracle(const SemanticMap& y, int d, int unlabeled, DistanceMetric metric, bool ignore) {
  const int h = y.height(), w = y.width();
  auto differs = [&](int a, int b) { return a != b && !(ignore && (a == unlabeled || b == unlabeled)); };
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int di[] = {-1, 1, 0, 0};
      const int dj[] = {0, 0, -1, 1};
      for (int n = 0; n < 4; ++n) {
        const int r = i + di[n], c = j + dj[n];
        if (r >= 0 && r < h && c >= 0 && c < w && differs(y(i, j), y(r, c))) {
          edges.emplace_back(i, j);
          break;
        }
      }
    }
  }
  SemanticMap out = y;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (auto [r, c] : edges) {
        const double dr = std::abs(i - r), dc = std::abs(j - c);
        double dist = 0.0;
        if (metric == DistanceMetric::chebyshev) dist = std::max(dr, dc);
        if (metric == DistanceMetric::manhattan) dist = dr + dc;
        if (metric == DistanceMetric::euclidean) dist = std::hypot(dr, dc);
        if (dist <= d + 1e-12) {
          out.set(i, j, static_cast<ClassId>(unlabeled));
          break;
        }
      }
    }
  }
  return out;
}

SemanticMap two_columns_5x5() {
  SemanticMap m(5, 5, 3, 2);
  for (int i = 0; i < 5; ++i) {
    m.set(i, 0, 1);
    m.set(i, 1, 1);
  }
  return m;
}

}  // namespace

TEST_CASE("downsampling fixed points") {
  CHECK(corrupt_ds(SemanticMap(8, 8, 3, 2), 4) == SemanticMap(8, 8, 3, 2));
  CounterStream rng(1, "test.corrupt");
  const auto y = random_map(7, 9, 4, rng);
  CHECK(corrupt_ds(y, 1) == y);

  SemanticMap halves(4, 4, 2);
  for (int i = 0; i < 4; ++i) {
    halves.set(i, 2, 1);
    halves.set(i, 3, 1);
  }
  CHECK(corrupt_ds(halves, 2) == halves);
}

TEST_CASE("downsampling is blockwise constant and idempotent") {
  CounterStream rng(2, "test.corrupt");
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 3 + static_cast<int>(rng.below(14));
    const int w = 3 + static_cast<int>(rng.below(14));
    const int f = 2 + static_cast<int>(rng.below(4));
    const auto y = random_map(h, w, 5, rng);
    const auto d = corrupt_ds(y, f);
    CHECK(corrupt_ds(d, f) == d);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        CHECK(d(i, j) == d((i / f) * f, (j / f) * f));
        // The value comes from the block it sits in.
        bool seen = false;
        for (int r = (i / f) * f; r < std::min(h, (i / f + 1) * f) && !seen; ++r) {
          for (int c = (j / f) * f; c < std::min(w, (j / f + 1) * f) && !seen; ++c) seen = y(r, c) == d(i, j);
        }
        CHECK(seen);
      }
    }
  }
}

TEST_CASE("downsampling a non-multiple size matches pad then crop") {
  CounterStream rng(3, "test.corrupt");
  const auto y = random_map(6, 7, 3, rng);
  const int f = 4;
  // Replicate-pad to 8 x 8 by hand.
  SemanticMap padded(8, 8, 3);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) padded.set(i, j, y(std::min(i, 5), std::min(j, 6)));
  }
  const auto big = corrupt_ds(padded, f);
  const auto small = corrupt_ds(y, f);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 7; ++j) CHECK(small(i, j) == big(i, j));
  }
}

TEST_CASE("edge band on the two-column example") {
  const auto out = corrupt_edge(two_columns_5x5(), 2, 0);
  CHECK(out == SemanticMap(5, 5, 3, 0));
  CHECK(out == edge_oracle(two_columns_5x5(), 2, 0, DistanceMetric::chebyshev, false));
}

TEST_CASE("edge band at distance zero marks only edge cells") {
  const auto out = corrupt_edge(two_columns_5x5(), 0, 0);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const bool edge = j == 1 || j == 2;
      CHECK(out(i, j) == (edge ? 0 : two_columns_5x5()(i, j)));
    }
  }
}

TEST_CASE("constant maps have no edges") {
  const SemanticMap y(6, 6, 3, 1);
  CHECK(corrupt_edge(y, 3, 0) == y);
}

TEST_CASE("edge band matches the exhaustive oracle") {
  CounterStream rng(4, "test.corrupt");
  for (auto metric : {DistanceMetric::chebyshev, DistanceMetric::manhattan, DistanceMetric::euclidean}) {
    for (bool ignore : {false, true}) {
      for (int trial = 0; trial < 15; ++trial) {
        // Blocky maps so that non-edge cells exist.
        const auto coarse = random_map(3, 3, 4, rng);
        SemanticMap y(12, 11, 4);
        for (int i = 0; i < 12; ++i) {
          for (int j = 0; j < 11; ++j) y.set(i, j, coarse(i / 4, j / 4));
        }
        const int d = static_cast<int>(rng.below(4));
        CHECK(corrupt_edge(y, d, 0, metric, ignore) == edge_oracle(y, d, 0, metric, ignore));
      }
    }
  }
}

TEST_CASE("edge corruption is idempotent only when unlabeled boundaries are ignored") {
  CounterStream rng(5, "test.corrupt");
  for (int trial = 0; trial < 20; ++trial) {
    const auto y = random_map(10, 10, 4, rng);
    const auto once = corrupt_edge(y, 1, 0, DistanceMetric::chebyshev, true);
    CHECK(corrupt_edge(once, 1, 0, DistanceMetric::chebyshev, true) == once);
  }
  // Without the flag the band grows.
  SemanticMap wide(1, 12, 2);
  for (int j = 6; j < 12; ++j) wide.set(0, j, 1);
  const auto once = corrupt_edge(wide, 1, 0);
  const auto twice = corrupt_edge(once, 1, 0);
  CHECK(twice.flat().size() == once.flat().size());
  CHECK_FALSE(twice == once);
}

TEST_CASE("random flips") {
  CounterStream rng(6, "test.corrupt");
  const auto y = random_map(64, 64, 4, rng);
  CHECK(corrupt_random(y, 0.0, 0, {1, 0}) == y);
  CHECK(corrupt_random(y, 1.0, 0, {1, 0}) == SemanticMap(64, 64, 4, 0));

  // Use a map without the unlabeled class so every flip is visible.
  const SemanticMap ones(64, 64, 4, 1);
  const auto out = corrupt_random(ones, 0.10, 0, {7, 3});
  const double flipped = static_cast<double>(std::count(out.flat().begin(), out.flat().end(), ClassId{0}));
  CHECK(within_binomial(flipped, 64.0 * 64.0, 0.10));
  CHECK(corrupt_random(ones, 0.10, 0, {7, 3}) == out);
  CHECK_FALSE(corrupt_random(ones, 0.10, 0, {7, 4}) == out);
}

TEST_CASE("changed cells become exactly the unlabeled class") {
  CounterStream rng(7, "test.corrupt");
  for (int trial = 0; trial < 10; ++trial) {
    const auto y = random_map(16, 16, 5, rng);
    CorruptionConfig cfg;
    cfg.unlabeled_class = 3;
    cfg.seed = static_cast<std::uint64_t>(trial);
    for (auto mode : {CorruptionMode::edge, CorruptionMode::random}) {
      cfg.mode = mode;
      const auto out = corrupt(y, cfg, 2);
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        if (out[k] != y[k]) CHECK(out[k] == 3);
      }
    }
  }
}

TEST_CASE("corruption argument errors") {
  SemanticMap masked(3, 3, 2);
  masked.set(1, 1, masked.mask());
  CHECK_THROWS_AS(corrupt_ds(masked, 2), ArgumentError);
  CHECK_THROWS_AS(corrupt_edge(masked, 2, 0), ArgumentError);
  CHECK_THROWS_AS(corrupt_random(masked, 0.1, 0, {}), ArgumentError);
  const SemanticMap y(3, 3, 2);
  CHECK_THROWS_AS(corrupt_ds(y, 0), ArgumentError);
  CHECK_THROWS_AS(corrupt_edge(y, -1, 0), ArgumentError);
  CHECK_THROWS_AS(corrupt_edge(y, 1, 2), ArgumentError);
  CHECK_THROWS_AS(corrupt_random(y, 1.5, 0, {}), ArgumentError);
  CHECK_THROWS_AS(corruption_mode_from_string("blur"), ArgumentError);
  CHECK(corruption_mode_from_string(to_string(CorruptionMode::edge)) == CorruptionMode::edge);
  CHECK(distance_metric_from_string("manhattan") == DistanceMetric::manhattan);
}
