// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "scdm/labelmap.hpp"
#include "scdm/rng.hpp"

namespace scdm {

enum class CorruptionMode { ds, edge, random };
enum class DistanceMetric { chebyshev, manhattan, euclidean };

struct CorruptionConfig {
  CorruptionMode mode = CorruptionMode::random;
  int ds_factor = 4;
  int edge_distance = 2;
  double random_rate = 0.10;
  int unlabeled_class = 0;
  DistanceMetric metric = DistanceMetric::chebyshev;
  bool ignore_unlabeled_edges = false;
  std::uint64_t seed = 0;
};

std::string to_string(CorruptionMode mode);
CorruptionMode corruption_mode_from_string(const std::string& name);
std::string to_string(DistanceMetric metric);
DistanceMetric distance_metric_from_string(const std::string& name);

/// Nearest-neighbour downsample (top-left cell of each factor x factor block)
/// followed by nearest-neighbour upsample. Sizes that are not multiples of the
/// factor are edge-replicated up to one and cropped back afterwards.
SemanticMap corrupt_ds(const SemanticMap& y0, int factor);

/// Every cell within `distance` of an edge cell (one whose 4-neighbour has a
/// different class) becomes `unlabeled`. With ignore_unlabeled_edges, class
/// changes that involve `unlabeled` do not create edges.
SemanticMap corrupt_edge(const SemanticMap& y0, int distance, int unlabeled,
                         DistanceMetric metric = DistanceMetric::chebyshev, bool ignore_unlabeled_edges = false);

/// Each cell independently becomes `unlabeled` with probability `rate`.
SemanticMap corrupt_random(const SemanticMap& y0, double rate, int unlabeled, const RngKey& key);

SemanticMap corrupt(const SemanticMap& y0, const CorruptionConfig& config, std::uint64_t map_id = 0);

}  // namespace scdm
