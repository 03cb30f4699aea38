// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scdm/errors.hpp"
#include "scdm/labelmap.hpp"
#include "scdm/rng.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

/// H x W x CH image stored as an (H*W) x CH matrix: one row per pixel in
/// row-major pixel order, one column per channel.
template <typename Scalar>
class BasicImage {
 public:
  using Pixels = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicImage() = default;
  BasicImage(int height, int width, int channels, Scalar fill = Scalar(0))
      : height_(height), width_(width), values_(Pixels::Constant(Eigen::Index{height} * width, channels, fill)) {
    if (height <= 0 || width <= 0 || channels <= 0) throw ArgumentError("image dimensions must be positive");
  }
  BasicImage(int height, int width, Pixels values) : height_(height), width_(width), values_(std::move(values)) {
    if (height <= 0 || width <= 0 || values_.cols() <= 0 || values_.rows() != Eigen::Index{height} * width) {
      throw ArgumentError("image pixel matrix does not match its dimensions");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return static_cast<int>(values_.cols()); }
  Eigen::Index pixels() const { return values_.rows(); }
  Eigen::Index size() const { return values_.size(); }

  Pixels& values() { return values_; }
  const Pixels& values() const { return values_; }
  Scalar& operator()(int i, int j, int ch) { return values_(Eigen::Index{i} * width_ + j, ch); }
  Scalar operator()(int i, int j, int ch) const { return values_(Eigen::Index{i} * width_ + j, ch); }

  bool same_shape(const BasicImage& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels() == o.channels();
  }

  template <typename Other>
  BasicImage<Other> cast() const {
    return BasicImage<Other>(height_, width_, values_.template cast<Other>());
  }

  bool operator==(const BasicImage& o) const { return same_shape(o) && values_ == o.values_; }

 private:
  int height_ = 0;
  int width_ = 0;
  Pixels values_;
};

using ToyImage = BasicImage<double>;

/// SIM1: "SIM1\n<H> <W> <CH>\n" then little-endian f32 values, row-major
/// over (i, j, channel).
std::vector<std::uint8_t> encode_image(const ToyImage& image);
ToyImage decode_image(std::span<const std::uint8_t> bytes);
void save_image(const ToyImage& image, const std::filesystem::path& path);
ToyImage load_image(const std::filesystem::path& path);

/// Desk-scale image distribution: each pixel of class c is m(c) + sigma0 * n
/// with n standard normal, independently per pixel and channel.
struct ToyDataSpec {
  Eigen::MatrixXd class_means;  // C x CH
  double sigma0 = 0.1;
  Eigen::VectorXd class_prior;  // length C

  int num_classes() const { return static_cast<int>(class_means.rows()); }
  int channels() const { return static_cast<int>(class_means.cols()); }
  void validate() const;
};

std::string toy_spec_to_json(const ToyDataSpec& spec);
ToyDataSpec toy_spec_from_json(const std::string& text);

/// m(y0) per pixel.
ToyImage class_mean_image(const ToyDataSpec& spec, const SemanticMap& y0);
ToyImage sample_toy_image(const ToyDataSpec& spec, const SemanticMap& y0, CounterStream& rng);

ToyImage standard_normal_image(int height, int width, int channels, CounterStream& rng);

struct NoisedImage {
  ToyImage x_t;
  ToyImage eps;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
NoisedImage forward_noise(const ToyImage& x0, const ImageSchedule& schedule, int t, CounterStream& rng);
ToyImage noise_with(const ToyImage& x0, const ToyImage& eps, double alpha_bar);

}  // namespace scdm
