// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "scdm/image.hpp"
#include "scdm/labelmap.hpp"
#include "scdm/rng.hpp"

namespace scdm::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("scdm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// |hits/n - p| within k binomial standard deviations.
inline bool within_binomial(double hits, double n, double p, double k = 4.0) {
  const double sd = std::sqrt(p * (1.0 - p) / n);
  return std::abs(hits / n - p) <= k * sd;
}

inline SemanticMap random_map(int h, int w, int num_classes, CounterStream& rng, bool allow_mask = false) {
  SemanticMap m(h, w, num_classes);
  const auto span = static_cast<std::uint64_t>(num_classes + (allow_mask ? 1 : 0));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.set_flat(k, static_cast<ClassId>(rng.below(span)));
  return m;
}

inline ToyImage random_image(int h, int w, int ch, CounterStream& rng, double scale = 1.0) {
  ToyImage img(h, w, ch);
  for (Eigen::Index k = 0; k < img.size(); ++k) img.values().data()[k] = scale * rng.normal();
  return img;
}

}  // namespace scdm::testing
