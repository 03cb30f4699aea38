// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/corrupt.hpp"

#include <algorithm>
#include <cstdlib>

#include "scdm/errors.hpp"

namespace scdm {

std::string to_string(CorruptionMode mode) {
  switch (mode) {
    case CorruptionMode::ds:
      return "ds";
    case CorruptionMode::edge:
      return "edge";
    case CorruptionMode::random:
      return "random";
  }
  return "random";
}

CorruptionMode corruption_mode_from_string(const std::string& name) {
  if (name == "ds") return CorruptionMode::ds;
  if (name == "edge") return CorruptionMode::edge;
  if (name == "random") return CorruptionMode::random;
  throw ArgumentError("unknown corruption mode: " + name);
}

std::string to_string(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::chebyshev:
      return "chebyshev";
    case DistanceMetric::manhattan:
      return "manhattan";
    case DistanceMetric::euclidean:
      return "euclidean";
  }
  return "chebyshev";
}

DistanceMetric distance_metric_from_string(const std::string& name) {
  if (name == "chebyshev") return DistanceMetric::chebyshev;
  if (name == "manhattan") return DistanceMetric::manhattan;
  if (name == "euclidean") return DistanceMetric::euclidean;
  throw ArgumentError("unknown distance metric: " + name);
}

namespace {

void require_clean(const SemanticMap& y0, const char* who) {
  if (y0.has_mask()) throw ArgumentError(std::string(who) + ": input must not contain MASK");
}

void require_class(const SemanticMap& y0, int unlabeled, const char* who) {
  if (unlabeled < 0 || unlabeled >= y0.num_classes()) throw ArgumentError(std::string(who) + ": unlabeled class out of range");
}

}  // namespace

SemanticMap corrupt_ds(const SemanticMap& y0, int factor) {
  require_clean(y0, "corrupt_ds");
  if (factor < 1) throw ArgumentError("corrupt_ds: factor must be >= 1");
  if (factor == 1) return y0;
  const int h = y0.height();
  const int w = y0.width();
  // Replicate-padding then taking the block's top-left cell equals indexing
  // the original with clamped coordinates.
  LabelGrid out(h, w);
  for (int i = 0; i < h; ++i) {
    const int si = std::min((i / factor) * factor, h - 1);
    for (int j = 0; j < w; ++j) {
      const int sj = std::min((j / factor) * factor, w - 1);
      out(i, j) = y0(si, sj);
    }
  }
  return SemanticMap(std::move(out), y0.num_classes());
}

SemanticMap corrupt_edge(const SemanticMap& y0, int distance, int unlabeled, DistanceMetric metric,
                         bool ignore_unlabeled_edges) {
  require_clean(y0, "corrupt_edge");
  require_class(y0, unlabeled, "corrupt_edge");
  if (distance < 0) throw ArgumentError("corrupt_edge: distance must be >= 0");
  const int h = y0.height();
  const int w = y0.width();

  auto differs = [&](ClassId a, ClassId b) {
    if (a == b) return false;
    if (ignore_unlabeled_edges && (a == unlabeled || b == unlabeled)) return false;
    return true;
  };
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> edge(h, w);
  edge.setConstant(false);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const ClassId v = y0(i, j);
      edge(i, j) = (i > 0 && differs(v, y0(i - 1, j))) || (i + 1 < h && differs(v, y0(i + 1, j))) ||
                   (j > 0 && differs(v, y0(i, j - 1))) || (j + 1 < w && differs(v, y0(i, j + 1)));
    }
  }

  auto within = [&](int di, int dj) {
    switch (metric) {
      case DistanceMetric::chebyshev:
        return std::max(std::abs(di), std::abs(dj)) <= distance;
      case DistanceMetric::manhattan:
        return std::abs(di) + std::abs(dj) <= distance;
      case DistanceMetric::euclidean:
        return di * di + dj * dj <= distance * distance;
    }
    return false;
  };

  SemanticMap out = y0;
  const auto label = static_cast<ClassId>(unlabeled);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!edge(i, j)) continue;
      for (int di = -distance; di <= distance; ++di) {
        const int r = i + di;
        if (r < 0 || r >= h) continue;
        for (int dj = -distance; dj <= distance; ++dj) {
          const int c = j + dj;
          if (c < 0 || c >= w || !within(di, dj)) continue;
          out.set(r, c, label);
        }
      }
    }
  }
  return out;
}

SemanticMap corrupt_random(const SemanticMap& y0, double rate, int unlabeled, const RngKey& key) {
  require_clean(y0, "corrupt_random");
  require_class(y0, unlabeled, "corrupt_random");
  if (!(rate >= 0.0 && rate <= 1.0)) throw ArgumentError("corrupt_random: rate must lie in [0, 1]");
  SemanticMap out = y0;
  const auto label = static_cast<ClassId>(unlabeled);
  CounterStream rng(key.seed, "corrupt.random", {key.map_id});
  for (Eigen::Index k = 0; k < y0.size(); ++k) {
    if (rng.uniform() < rate) out.set_flat(k, label);
  }
  return out;
}

SemanticMap corrupt(const SemanticMap& y0, const CorruptionConfig& config, std::uint64_t map_id) {
  switch (config.mode) {
    case CorruptionMode::ds:
      return corrupt_ds(y0, config.ds_factor);
    case CorruptionMode::edge:
      return corrupt_edge(y0, config.edge_distance, config.unlabeled_class, config.metric, config.ignore_unlabeled_edges);
    case CorruptionMode::random:
      return corrupt_random(y0, config.random_rate, config.unlabeled_class, RngKey{config.seed, map_id});
  }
  throw ArgumentError("corrupt: unknown mode");
}

}  // namespace scdm
