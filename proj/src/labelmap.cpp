// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/labelmap.hpp"

#include <algorithm>
#include <charconv>
#include <string_view>

#include "scdm/errors.hpp"
#include "scdm/io_util.hpp"

namespace scdm {

namespace {

constexpr int kMaxClasses = 65535;

void check_shape(Eigen::Index rows, Eigen::Index cols, int num_classes) {
  if (rows <= 0 || cols <= 0) throw ArgumentError("label map must have positive height and width");
  if (num_classes < 1 || num_classes > kMaxClasses) throw ArgumentError("num_classes must be in [1, 65535]");
}

}  // namespace

SemanticMap::SemanticMap(LabelGrid cells, int num_classes) : cells_(std::move(cells)), num_classes_(num_classes) {
  check_shape(cells_.rows(), cells_.cols(), num_classes_);
  if ((cells_ > mask()).any()) throw ArgumentError("label value exceeds MASK");
}

SemanticMap::SemanticMap(int height, int width, int num_classes, ClassId fill) : num_classes_(num_classes) {
  check_shape(height, width, num_classes);
  check_value(fill);
  cells_ = LabelGrid::Constant(height, width, fill);
}

SemanticMap SemanticMap::all_masked(int height, int width, int num_classes) {
  return SemanticMap(height, width, num_classes, static_cast<ClassId>(num_classes));
}

void SemanticMap::check_value(ClassId value) const {
  if (value > mask()) throw ArgumentError("label value " + std::to_string(value) + " exceeds MASK");
}

void SemanticMap::set(int i, int j, ClassId value) {
  check_value(value);
  cells_(i, j) = value;
}

void SemanticMap::set_flat(Eigen::Index flat, ClassId value) {
  check_value(value);
  cells_.data()[flat] = value;
}

bool SemanticMap::has_mask() const { return (cells_ == mask()).any(); }

Eigen::Index SemanticMap::count_masked() const { return (cells_ == mask()).count(); }

bool SemanticMap::same_shape(const SemanticMap& other) const {
  return height() == other.height() && width() == other.width() && num_classes_ == other.num_classes_;
}

bool SemanticMap::operator==(const SemanticMap& other) const {
  return same_shape(other) && (cells_ == other.cells_).all();
}

std::vector<std::uint8_t> encode_map(const SemanticMap& map) {
  const std::string header = "SLM1\n" + std::to_string(map.height()) + " " + std::to_string(map.width()) + " " +
                             std::to_string(map.num_classes()) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 2 * static_cast<std::size_t>(map.size()));
  for (ClassId v : map.flat()) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

SemanticMap decode_map(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  constexpr std::string_view kMagic = "SLM1\n";
  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin(), [](char a, std::uint8_t b) { return a == static_cast<char>(b); })) {
    throw FormatError("bad magic: expected SLM1");
  }
  pos = kMagic.size();
  const std::string_view dims = next_line(bytes, pos);

  long long values[3] = {0, 0, 0};
  const char* cur = dims.data();
  const char* end = dims.data() + dims.size();
  for (int k = 0; k < 3; ++k) {
    if (k > 0) {
      if (cur == end || *cur != ' ') throw FormatError("malformed SLM1 dimension line");
      ++cur;
    }
    auto [next, ec] = std::from_chars(cur, end, values[k]);
    if (ec != std::errc() || next == cur) throw FormatError("malformed SLM1 dimension line");
    cur = next;
  }
  if (cur != end) throw FormatError("trailing characters in SLM1 dimension line");
  const long long h = values[0], w = values[1], c = values[2];
  if (h <= 0 || w <= 0 || c < 1 || c > kMaxClasses) throw FormatError("SLM1 dimensions out of range");

  const auto cells = static_cast<std::size_t>(h * w);
  const std::size_t needed = 2 * cells;
  if (bytes.size() - pos < needed) throw TruncatedError("SLM1 payload truncated");
  if (bytes.size() - pos > needed) throw FormatError("trailing bytes after SLM1 payload");

  LabelGrid grid(h, w);
  for (std::size_t k = 0; k < cells; ++k) {
    const auto v = static_cast<ClassId>(bytes[pos + 2 * k] | (bytes[pos + 2 * k + 1] << 8));
    if (v > c) {
      throw CorruptDataError("cell value " + std::to_string(v) + " exceeds MASK=" + std::to_string(c));
    }
    grid.data()[k] = v;
  }
  return SemanticMap(std::move(grid), static_cast<int>(c));
}

SemanticMap load_map(const std::filesystem::path& path) { return decode_map(read_bytes(path)); }

void save_map(const SemanticMap& map, const std::filesystem::path& path) { write_atomic(path, encode_map(map)); }

std::vector<std::optional<double>> class_iou(const SemanticMap& pred, const SemanticMap& truth,
                                             std::optional<int> ignore) {
  if (!pred.same_shape(truth)) throw ArgumentError("miou: maps differ in shape or class count");
  const int num_classes = truth.num_classes();
  if (ignore && (*ignore < 0 || *ignore > num_classes)) throw ArgumentError("miou: ignore class out of range");
  const bool ignore_mask = ignore && *ignore == num_classes;

  std::vector<long long> inter(static_cast<std::size_t>(num_classes), 0);
  std::vector<long long> pred_count(inter.size(), 0);
  std::vector<long long> truth_count(inter.size(), 0);
  const ClassId mask = truth.mask();
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    const ClassId t = truth[k];
    const ClassId p = pred[k];
    if (ignore && t == *ignore) continue;
    if (t == mask || p == mask) {
      if (ignore_mask) continue;
      throw ArgumentError("miou: MASK cells present and not ignored");
    }
    ++truth_count[t];
    ++pred_count[p];
    if (t == p) ++inter[t];
  }

  std::vector<std::optional<double>> iou(inter.size());
  for (int c = 0; c < num_classes; ++c) {
    if (ignore && c == *ignore) continue;
    const auto k = static_cast<std::size_t>(c);
    const long long uni = truth_count[k] + pred_count[k] - inter[k];
    if (uni > 0) iou[k] = static_cast<double>(inter[k]) / static_cast<double>(uni);
  }
  return iou;
}

double miou(const SemanticMap& pred, const SemanticMap& truth, std::optional<int> ignore) {
  const auto iou = class_iou(pred, truth, ignore);
  double sum = 0.0;
  int n = 0;
  for (const auto& v : iou) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) throw ArgumentError("miou: no evaluable classes");
  return sum / n;
}

}  // namespace scdm
