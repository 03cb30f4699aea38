// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/image.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "scdm/io_util.hpp"

namespace scdm {

std::vector<std::uint8_t> encode_image(const ToyImage& image) {
  const std::string header = "SIM1\n" + std::to_string(image.height()) + " " + std::to_string(image.width()) + " " +
                             std::to_string(image.channels()) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * static_cast<std::size_t>(image.size()));
  const auto& v = image.values();
  for (Eigen::Index p = 0; p < v.rows(); ++p) {
    for (Eigen::Index ch = 0; ch < v.cols(); ++ch) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v(p, ch)));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return out;
}

ToyImage decode_image(std::span<const std::uint8_t> bytes) {
  constexpr std::string_view kMagic = "SIM1\n";
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError("bad magic: expected SIM1");
  }
  std::size_t pos = kMagic.size();
  const std::string_view dims = next_line(bytes, pos);
  long long values[3] = {0, 0, 0};
  const char* cur = dims.data();
  const char* end = dims.data() + dims.size();
  for (int k = 0; k < 3; ++k) {
    if (k > 0) {
      if (cur == end || *cur != ' ') throw FormatError("malformed SIM1 dimension line");
      ++cur;
    }
    auto [next, ec] = std::from_chars(cur, end, values[k]);
    if (ec != std::errc() || next == cur) throw FormatError("malformed SIM1 dimension line");
    cur = next;
  }
  if (cur != end) throw FormatError("trailing characters in SIM1 dimension line");
  const long long h = values[0], w = values[1], ch = values[2];
  if (h <= 0 || w <= 0 || ch <= 0 || h * w * ch > (1LL << 32)) throw FormatError("SIM1 dimensions out of range");
  const auto count = static_cast<std::size_t>(h * w * ch);
  if (bytes.size() - pos < 4 * count) throw TruncatedError("SIM1 payload truncated");
  if (bytes.size() - pos > 4 * count) throw FormatError("trailing bytes after SIM1 payload");

  ToyImage::Pixels px(h * w, ch);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[pos + 4 * k + static_cast<std::size_t>(b)]} << (8 * b);
    px.data()[k] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return ToyImage(static_cast<int>(h), static_cast<int>(w), std::move(px));
}

void save_image(const ToyImage& image, const std::filesystem::path& path) { write_atomic(path, encode_image(image)); }

ToyImage load_image(const std::filesystem::path& path) { return decode_image(read_bytes(path)); }

void ToyDataSpec::validate() const {
  if (class_means.rows() < 1 || class_means.cols() < 1) throw ArgumentError("toy spec needs C >= 1 and CH >= 1");
  if (class_prior.size() != class_means.rows()) throw ArgumentError("toy spec prior length must equal C");
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) throw ArgumentError("toy spec sigma0 must be >= 0");
  if ((class_prior.array() < 0.0).any() || std::abs(class_prior.sum() - 1.0) > 1e-9) {
    throw ArgumentError("toy spec prior must be a probability vector");
  }
  if (!class_means.allFinite()) throw ArgumentError("toy spec means must be finite");
}

std::string toy_spec_to_json(const ToyDataSpec& spec) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  auto means = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < spec.class_means.rows(); ++c) {
    std::vector<double> row(static_cast<std::size_t>(spec.class_means.cols()));
    for (Eigen::Index ch = 0; ch < spec.class_means.cols(); ++ch) row[static_cast<std::size_t>(ch)] = spec.class_means(c, ch);
    means.push_back(row);
  }
  j["class_means"] = means;
  j["sigma0"] = spec.sigma0;
  j["class_prior"] = std::vector<double>(spec.class_prior.data(), spec.class_prior.data() + spec.class_prior.size());
  return j.dump(2) + "\n";
}

ToyDataSpec toy_spec_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto means = j.at("class_means").get<std::vector<std::vector<double>>>();
    if (means.empty() || means.front().empty()) throw FormatError("toy spec has no class means");
    ToyDataSpec spec;
    spec.class_means.resize(static_cast<Eigen::Index>(means.size()), static_cast<Eigen::Index>(means.front().size()));
    for (std::size_t c = 0; c < means.size(); ++c) {
      if (means[c].size() != means.front().size()) throw FormatError("ragged class_means");
      for (std::size_t ch = 0; ch < means[c].size(); ++ch) {
        spec.class_means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(ch)) = means[c][ch];
      }
    }
    spec.sigma0 = j.at("sigma0").get<double>();
    if (j.contains("class_prior")) {
      const auto prior = j.at("class_prior").get<std::vector<double>>();
      spec.class_prior = Eigen::Map<const Eigen::VectorXd>(prior.data(), static_cast<Eigen::Index>(prior.size()));
    } else {
      spec.class_prior = Eigen::VectorXd::Constant(spec.class_means.rows(), 1.0 / static_cast<double>(spec.class_means.rows()));
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("toy spec: ") + e.what());
  }
}

ToyImage class_mean_image(const ToyDataSpec& spec, const SemanticMap& y0) {
  if (y0.num_classes() != spec.num_classes()) throw ArgumentError("class_mean_image: class count mismatch");
  if (y0.has_mask()) throw ArgumentError("class_mean_image: map contains MASK");
  ToyImage out(y0.height(), y0.width(), spec.channels());
  for (Eigen::Index k = 0; k < y0.size(); ++k) out.values().row(k) = spec.class_means.row(y0[k]);
  return out;
}

ToyImage sample_toy_image(const ToyDataSpec& spec, const SemanticMap& y0, CounterStream& rng) {
  ToyImage out = class_mean_image(spec, y0);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.values().data()[k] += spec.sigma0 * rng.normal();
  return out;
}

ToyImage standard_normal_image(int height, int width, int channels, CounterStream& rng) {
  ToyImage out(height, width, channels);
  for (Eigen::Index k = 0; k < out.size(); ++k) out.values().data()[k] = rng.normal();
  return out;
}

ToyImage noise_with(const ToyImage& x0, const ToyImage& eps, double alpha_bar) {
  if (!x0.same_shape(eps)) throw ArgumentError("noise_with: shape mismatch");
  return ToyImage(x0.height(), x0.width(), std::sqrt(alpha_bar) * x0.values() + std::sqrt(1.0 - alpha_bar) * eps.values());
}

NoisedImage forward_noise(const ToyImage& x0, const ImageSchedule& schedule, int t, CounterStream& rng) {
  if (t < 1 || t > schedule.steps()) throw ArgumentError("forward_noise: step out of range");
  ToyImage eps = standard_normal_image(x0.height(), x0.width(), x0.channels(), rng);
  ToyImage xt = noise_with(x0, eps, schedule.alpha_bar(t));
  return {std::move(xt), std::move(eps)};
}

}  // namespace scdm
