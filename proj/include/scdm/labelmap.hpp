// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scdm {

using ClassId = std::uint16_t;
using LabelGrid = Eigen::Array<ClassId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A grid of class ids in {0, ..., C-1} plus the absorbing MASK state, which
/// is stored as the value C.
class SemanticMap {
 public:
  SemanticMap(LabelGrid cells, int num_classes);
  SemanticMap(int height, int width, int num_classes, ClassId fill = 0);

  /// Every cell set to MASK; this is also the null condition for guidance.
  static SemanticMap all_masked(int height, int width, int num_classes);

  int height() const { return static_cast<int>(cells_.rows()); }
  int width() const { return static_cast<int>(cells_.cols()); }
  int num_classes() const { return num_classes_; }
  Eigen::Index size() const { return cells_.size(); }
  ClassId mask() const { return static_cast<ClassId>(num_classes_); }

  ClassId operator()(int i, int j) const { return cells_(i, j); }
  ClassId operator[](Eigen::Index flat) const { return cells_.data()[flat]; }
  void set(int i, int j, ClassId value);
  void set_flat(Eigen::Index flat, ClassId value);

  const LabelGrid& cells() const { return cells_; }
  std::span<const ClassId> flat() const { return {cells_.data(), static_cast<std::size_t>(cells_.size())}; }

  bool is_masked(Eigen::Index flat) const { return cells_.data()[flat] == mask(); }
  bool has_mask() const;
  Eigen::Index count_masked() const;
  bool same_shape(const SemanticMap& other) const;

  bool operator==(const SemanticMap& other) const;

 private:
  void check_value(ClassId value) const;

  LabelGrid cells_;
  int num_classes_;
};

/// Reads the SLM1 layout: "SLM1\n", "<H> <W> <C>\n", then H*W little-endian
/// u16 cells in row-major order.
SemanticMap load_map(const std::filesystem::path& path);
SemanticMap decode_map(std::span<const std::uint8_t> bytes);

void save_map(const SemanticMap& map, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_map(const SemanticMap& map);

struct ClassStats {
  int num_classes = 0;
  std::vector<double> psi;  // inverse mean area fraction over maps containing c
  std::vector<double> phi;  // ln(1 / fraction of maps containing c)
  std::vector<bool> present;
  std::optional<int> unlabeled_class;
  bool phi_clamped = false;
  std::optional<double> scale_factor;

  double product(int c) const { return psi[static_cast<std::size_t>(c)] * phi[static_cast<std::size_t>(c)]; }
  std::vector<double> products() const;
};

struct StatsOptions {
  bool clamp_phi = false;
  std::optional<int> unlabeled_class;
  std::optional<double> target_min_product;
};

/// Per-class area and document-frequency statistics over a corpus. Classes
/// never observed receive the largest finite psi*phi product (as psi, with
/// phi = 1) so they diffuse slowest.
ClassStats estimate_stats(std::span<const SemanticMap> corpus, const StatsOptions& options = {});

std::string stats_to_json(const ClassStats& stats);
ClassStats stats_from_json(const std::string& text);
void save_stats(const ClassStats& stats, const std::filesystem::path& path);
ClassStats load_stats(const std::filesystem::path& path);

/// Per-class IoU; nullopt where the class has an empty union or is ignored.
/// Pixels whose truth equals `ignore` are skipped.
std::vector<std::optional<double>> class_iou(const SemanticMap& pred, const SemanticMap& truth,
                                             std::optional<int> ignore = std::nullopt);

double miou(const SemanticMap& pred, const SemanticMap& truth, std::optional<int> ignore = std::nullopt);

}  // namespace scdm
