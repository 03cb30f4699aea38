// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/train.hpp"

#include <cmath>
#include <sstream>

#include "scdm/labeldiff.hpp"

namespace scdm {

double gaussian_kl(double mu_p, double logvar_p, double mu_q, double logvar_q) {
  const double diff = mu_p - mu_q;
  return 0.5 * (logvar_q - logvar_p + (std::exp(logvar_p) + diff * diff) / std::exp(logvar_q) - 1.0);
}

double clipped_log_posterior_variance(const ImageSchedule& schedule, int t) {
  if (t >= 2) return std::log(schedule.posterior_variance(t));
  if (schedule.steps() >= 2) return std::log(schedule.posterior_variance(2));
  return std::log(schedule.beta(1));
}

HybridLoss hybrid_loss(const ToyImage& eps_true, const DenoiserOutput& prediction, const ToyImage& x0,
                       const ToyImage& x_t, const ImageSchedule& schedule, int t, double lambda_vlb) {
  if (!eps_true.same_shape(prediction.epsilon) || !x0.same_shape(x_t) || !x0.same_shape(eps_true)) {
    throw ArgumentError("hybrid_loss: shape mismatch");
  }
  if (lambda_vlb < 0.0) throw ArgumentError("hybrid_loss: lambda_vlb must be >= 0");
  const auto n = static_cast<double>(eps_true.size());

  HybridLoss out;
  out.grad_eps = eps_true;
  const auto residual = (prediction.epsilon.values() - eps_true.values()).eval();
  out.l_simple = residual.squaredNorm() / n;
  out.grad_eps.values() = 2.0 * residual / n;

  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t - 1);
  const double beta = 1.0 - ab_t / ab_prev;
  const double coef_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
  const double coef_xt = std::sqrt(ab_t / ab_prev) * (1.0 - ab_prev) / (1.0 - ab_t);
  const double log_small = clipped_log_posterior_variance(schedule, t);
  const double log_large = std::log(beta);
  const double root = std::sqrt(ab_t);
  const double noise_scale = std::sqrt(1.0 - ab_t);

  if (prediction.variance_logit) out.grad_variance = ToyImage(x0.height(), x0.width(), x0.channels());
  double kl_sum = 0.0;
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    const double xt = x_t.values().data()[k];
    const double mu_q = coef_x0 * x0.values().data()[k] + coef_xt * xt;
    const double x0_pred = (xt - noise_scale * prediction.epsilon.values().data()[k]) / root;
    const double mu_p = coef_x0 * x0_pred + coef_xt * xt;
    double logvar_p = log_small;
    if (prediction.variance_logit) {
      const double frac = 0.5 * (prediction.variance_logit->values().data()[k] + 1.0);
      logvar_p = frac * log_large + (1.0 - frac) * log_small;
      const double d_logvar = 0.5 * (std::exp(logvar_p - log_small) - 1.0);
      out.grad_variance->values().data()[k] = lambda_vlb * d_logvar * 0.5 * (log_large - log_small) / n;
    }
    kl_sum += gaussian_kl(mu_p, logvar_p, mu_q, log_small);
  }
  out.l_vlb = kl_sum / n;
  out.total = out.l_simple + lambda_vlb * out.l_vlb;
  return out;
}

HybridLoss example_loss(const MlpDenoiser& model, const ToyImage& x0, const SemanticMap& y_t, int t,
                        const ToyImage& eps, const ImageSchedule& schedule, double lambda_vlb, Eigen::VectorXd* grad) {
  const ToyImage x_t = noise_with(x0, eps, schedule.alpha_bar(t));
  const DenoiserOutput pred = model.predict(x_t, y_t, t);
  HybridLoss loss = hybrid_loss(eps, pred, x0, x_t, schedule, t, lambda_vlb);
  if (grad) model.backward(x_t, y_t, t, loss.grad_eps, loss.grad_variance ? &*loss.grad_variance : nullptr, *grad);
  return loss;
}

LossReport train_step(MlpDenoiser& model, std::span<const TrainExample> batch, const LabelSchedule& label_schedule,
                      const ImageSchedule& image_schedule, const TrainConfig& config, CounterStream& rng) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  if (label_schedule.steps() != image_schedule.steps()) throw ArgumentError("train_step: schedules disagree on T");
  if (!(config.drop_rate >= 0.0 && config.drop_rate <= 1.0)) throw ArgumentError("train_step: drop_rate must lie in [0, 1]");
  const int T = image_schedule.steps();

  LossReport report;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameters().size());
  for (const auto& ex : batch) {
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
    const ToyImage eps = standard_normal_image(ex.x0.height(), ex.x0.width(), ex.x0.channels(), rng);
    const RngKey label_key{rng.next_u64(), 0};
    SemanticMap y_t = diffuse_to(ex.y0, label_schedule, t, label_key);
    if (rng.uniform() < config.drop_rate) {
      y_t = SemanticMap::all_masked(ex.y0.height(), ex.y0.width(), ex.y0.num_classes());
      ++report.dropped;
    }
    const HybridLoss loss = example_loss(model, ex.x0, y_t, t, eps, image_schedule, config.lambda_vlb, &grad);
    if (!std::isfinite(loss.total)) {
      std::ostringstream msg;
      msg << "train_step: non-finite loss at t=" << t << " (l_simple=" << loss.l_simple << ", l_vlb=" << loss.l_vlb << ")";
      throw TrainingError(msg.str());
    }
    report.l_simple += loss.l_simple;
    report.l_vlb += loss.l_vlb;
    report.steps.push_back(t);
  }
  const auto n = static_cast<double>(batch.size());
  report.l_simple /= n;
  report.l_vlb /= n;
  report.hybrid = report.l_simple + config.lambda_vlb * report.l_vlb;
  grad /= n;
  if (!grad.allFinite()) throw TrainingError("train_step: non-finite gradient");
  model.parameters() -= config.learning_rate * grad;
  return report;
}

}  // namespace scdm
