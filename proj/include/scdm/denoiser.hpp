// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "scdm/image.hpp"
#include "scdm/labelmap.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

struct DenoiserOutput {
  ToyImage epsilon;
  std::optional<ToyImage> variance_logit;  // in [-1, 1] nominally; interpolates beta and beta-tilde
};

/// Conditional noise predictor eps(x_t, y_t, t). `y` may contain MASK; the
/// all-MASK map is the null condition used for classifier-free guidance.
/// Implementations must be safe for concurrent const use.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual DenoiserOutput predict(const ToyImage& x_t, const SemanticMap& y, int t) const = 0;
  virtual std::string flavor() const = 0;
  virtual int num_classes() const = 0;
  virtual int channels() const = 0;
};

/// Exact E[eps | x_t, y_t] for ToyDataSpec data. Unmasked pixels use the
/// Gaussian posterior of their class; MASK pixels use the class mixture
/// weighted by prior times Gaussian evidence of x_t.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(ToyDataSpec spec, ImageSchedule schedule, std::optional<Eigen::VectorXd> mask_prior = std::nullopt);

  DenoiserOutput predict(const ToyImage& x_t, const SemanticMap& y, int t) const override;
  std::string flavor() const override { return "oracle"; }
  int num_classes() const override { return spec_.num_classes(); }
  int channels() const override { return spec_.channels(); }

  /// E[x0 | x_t pixel, label] at noise level alpha_bar. `label` == C means MASK.
  Eigen::RowVectorXd posterior_mean(const Eigen::RowVectorXd& x_t, int label, double alpha_bar) const;

  const ToyDataSpec& spec() const { return spec_; }
  const ImageSchedule& schedule() const { return schedule_; }

 private:
  ToyDataSpec spec_;
  ImageSchedule schedule_;
  Eigen::VectorXd mask_prior_;
};

std::unique_ptr<OracleDenoiser> oracle_denoiser(const ToyDataSpec& spec, const ImageSchedule& schedule,
                                                std::optional<Eigen::VectorXd> stats_prior = std::nullopt);

/// Reads a denoiser description: {"flavor":"oracle","toy_spec":{...}} or
/// {"flavor":"mlp","checkpoint":"<path relative to the file>"}.
std::unique_ptr<Denoiser> load_denoiser(const std::filesystem::path& path, const ImageSchedule& schedule);

}  // namespace scdm
