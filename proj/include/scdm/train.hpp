// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "scdm/denoiser.hpp"
#include "scdm/image.hpp"
#include "scdm/labelmap.hpp"
#include "scdm/mlp.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

/// KL(N(mu_p, e^lv_p) || N(mu_q, e^lv_q)) for scalars.
double gaussian_kl(double mu_p, double logvar_p, double mu_q, double logvar_q);

/// Posterior variance floor used in the variational term: beta-tilde_1 is 0,
/// so step 1 borrows beta-tilde_2 (or beta_1 when T = 1).
double clipped_log_posterior_variance(const ImageSchedule& schedule, int t);

struct HybridLoss {
  double l_simple = 0.0;
  double l_vlb = 0.0;
  double total = 0.0;
  ToyImage grad_eps;                      // d total / d eps prediction
  std::optional<ToyImage> grad_variance;  // d total / d variance logit
};

/// L_simple + lambda * L_vlb for one example. L_vlb is KL(p_theta || q) per
/// component with the model mean held fixed (no gradient to eps through it).
HybridLoss hybrid_loss(const ToyImage& eps_true, const DenoiserOutput& prediction, const ToyImage& x0,
                       const ToyImage& x_t, const ImageSchedule& schedule, int t, double lambda_vlb);

struct TrainConfig {
  double lambda_vlb = 0.001;
  double drop_rate = 0.2;
  double learning_rate = 0.05;
};

struct TrainExample {
  ToyImage x0;
  SemanticMap y0;
};

struct LossReport {
  double l_simple = 0.0;
  double l_vlb = 0.0;
  double hybrid = 0.0;
  std::vector<int> steps;
  int dropped = 0;
};

/// Loss of `model` on (x0, y_t) at step t with fixed noise, optionally
/// accumulating its parameter gradient.
HybridLoss example_loss(const MlpDenoiser& model, const ToyImage& x0, const SemanticMap& y_t, int t,
                        const ToyImage& eps, const ImageSchedule& schedule, double lambda_vlb,
                        Eigen::VectorXd* grad = nullptr);

/// One SGD step on a batch: sample t, noise the image, diffuse the labels,
/// drop the whole map to the null condition with probability drop_rate.
LossReport train_step(MlpDenoiser& model, std::span<const TrainExample> batch, const LabelSchedule& label_schedule,
                      const ImageSchedule& image_schedule, const TrainConfig& config, CounterStream& rng);

}  // namespace scdm
