// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

#include "scdm/denoiser.hpp"

namespace scdm {

struct MlpConfig {
  int num_classes = 2;
  int channels = 1;
  int embed_dim = 4;
  int hidden = 32;
  int steps = 50;  // T, for the time features
  bool learn_variance = true;
};

/// Per-pixel two-layer tanh network. Input is the pixel value, the label
/// embedding (the zero vector for MASK) and three time features; output is
/// eps and, optionally, a variance logit per channel.
class MlpDenoiser final : public Denoiser {
 public:
  MlpDenoiser(MlpConfig config, std::uint64_t seed);
  MlpDenoiser(MlpConfig config, Eigen::VectorXd parameters);

  DenoiserOutput predict(const ToyImage& x_t, const SemanticMap& y, int t) const override;
  std::string flavor() const override { return "mlp"; }
  int num_classes() const override { return config_.num_classes; }
  int channels() const override { return config_.channels; }

  const MlpConfig& config() const { return config_; }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  static Eigen::Index parameter_count(const MlpConfig& config);

  /// Accumulates dL/dparams into `grad` given upstream gradients of the
  /// eps output and (when learned) of the variance logit.
  void backward(const ToyImage& x_t, const SemanticMap& y, int t, const ToyImage& grad_eps,
                const ToyImage* grad_variance, Eigen::VectorXd& grad) const;

 private:
  Eigen::Index input_dim() const { return config_.channels + config_.embed_dim + 3; }
  Eigen::Index output_dim() const { return config_.channels * (config_.learn_variance ? 2 : 1); }
  Eigen::MatrixXd features(const ToyImage& x_t, const SemanticMap& y, int t) const;
  void check_inputs(const ToyImage& x_t, const SemanticMap& y) const;

  MlpConfig config_;
  Eigen::VectorXd params_;
};

/// Checkpoint: one line of JSON (the config plus "param_count"), '\n', then
/// param_count little-endian f32 values.
void save_checkpoint(const MlpDenoiser& model, const std::filesystem::path& path);
MlpDenoiser load_checkpoint(const std::filesystem::path& path);

}  // namespace scdm
