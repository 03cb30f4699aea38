// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace scdm {

std::string to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::fixed_small:
      return "fixed_small";
    case VarianceMode::fixed_large:
      return "fixed_large";
    case VarianceMode::learned:
      return "learned";
  }
  return "fixed_small";
}

VarianceMode variance_mode_from_string(const std::string& name) {
  if (name == "fixed_small") return VarianceMode::fixed_small;
  if (name == "fixed_large") return VarianceMode::fixed_large;
  if (name == "learned") return VarianceMode::learned;
  throw ArgumentError("unknown variance mode: " + name);
}

std::string to_string(Coupling coupling) { return coupling == Coupling::coupled ? "coupled" : "fresh"; }

Coupling coupling_from_string(const std::string& name) {
  if (name == "coupled") return Coupling::coupled;
  if (name == "fresh") return Coupling::fresh;
  throw ArgumentError("unknown coupling: " + name);
}

std::vector<int> respace(int T, int steps) {
  if (T < 1 || steps < 1) throw ArgumentError("respace: T and steps must be >= 1");
  if (steps >= T) {
    std::vector<int> all(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) all[static_cast<std::size_t>(t - 1)] = t;
    return all;
  }
  if (steps == 1) return {T};
  std::vector<int> out;
  for (int k = 0; k < steps; ++k) {
    const double pos = 1.0 + static_cast<double>(k) * (T - 1) / (steps - 1);
    const int t = static_cast<int>(std::lround(pos));
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  return out;
}

ToyImage guided_epsilon(const Denoiser& denoiser, const ToyImage& x_t, const SemanticMap& y_t, int t, double scale,
                        DenoiserOutput* conditional) {
  DenoiserOutput cond = denoiser.predict(x_t, y_t, t);
  ToyImage eps = cond.epsilon;
  if (scale != 0.0) {
    const auto null_map = SemanticMap::all_masked(y_t.height(), y_t.width(), y_t.num_classes());
    const DenoiserOutput uncond = denoiser.predict(x_t, null_map, t);
    eps.values() += scale * (cond.epsilon.values() - uncond.epsilon.values());
  }
  if (conditional) *conditional = std::move(cond);
  return eps;
}

double abs_quantile(const ToyImage& image, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ArgumentError("threshold percentile must lie in (0, 1]");
  std::vector<double> a(static_cast<std::size_t>(image.size()));
  for (Eigen::Index k = 0; k < image.size(); ++k) a[static_cast<std::size_t>(k)] = std::abs(image.values().data()[k]);
  std::sort(a.begin(), a.end());
  const double pos = p * static_cast<double>(a.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, a.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return a[lo] + frac * (a[hi] - a[lo]);
}

ToyImage dynamic_threshold(const ToyImage& x0, double percentile) {
  const double q = abs_quantile(x0, percentile);
  if (q <= 1.0) return x0;
  ToyImage out = x0;
  out.values() = x0.values().cwiseMax(-q).cwiseMin(q) / q;
  return out;
}

ReverseResult reverse_step(const Denoiser& denoiser, const ToyImage& x_t, const SemanticMap& y_t, int t, int t_prev,
                           const ImageSchedule& schedule, const SamplerConfig& config, const ReverseState& state,
                           CounterStream& noise) {
  if (t < 1 || t > schedule.steps() || t_prev < 0 || t_prev >= t) throw ArgumentError("reverse_step: need 0 <= t_prev < t <= T");
  DenoiserOutput cond{ToyImage(), std::nullopt};
  const ToyImage eps = guided_epsilon(denoiser, x_t, y_t, t, config.cfg_scale, &cond);

  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  ToyImage x0(x_t.height(), x_t.width(), (x_t.values() - std::sqrt(1.0 - ab_t) * eps.values()) / std::sqrt(ab_t));
  x0 = dynamic_threshold(x0, config.threshold_percentile);

  ToyImage x0_tilde = x0;
  if (!state.first_step && config.extrapolation != 0.0) {
    if (!state.x0_tilde_prev) throw ContractError("reverse_step: extrapolation needs the previous x0 prediction");
    if (!state.x0_tilde_prev->same_shape(x0)) throw ContractError("reverse_step: previous x0 prediction has the wrong shape");
    x0_tilde.values() = x0.values() + config.extrapolation * (x0.values() - state.x0_tilde_prev->values());
  }

  // Posterior q(x_{t_prev} | x_t, x0) for a possibly respaced pair of steps.
  const double beta = 1.0 - ab_t / ab_prev;
  const double coef_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
  const double coef_xt = std::sqrt(ab_t / ab_prev) * (1.0 - ab_prev) / (1.0 - ab_t);
  ToyImage x_prev(x_t.height(), x_t.width(), coef_x0 * x0_tilde.values() + coef_xt * x_t.values());

  if (t_prev > 0) {
    const double small = schedule.posterior_variance(t, t_prev);
    auto& v = x_prev.values();
    switch (config.variance) {
      case VarianceMode::fixed_small:
      case VarianceMode::fixed_large: {
        const double sd = std::sqrt(config.variance == VarianceMode::fixed_small ? small : beta);
        for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += sd * noise.normal();
        break;
      }
      case VarianceMode::learned: {
        if (!cond.variance_logit) throw ContractError("reverse_step: learned variance needs a variance output");
        const double log_large = std::log(beta);
        const double log_small = std::log(small > 0.0 ? small : beta);
        for (Eigen::Index k = 0; k < v.size(); ++k) {
          const double frac = 0.5 * (cond.variance_logit->values().data()[k] + 1.0);
          v.data()[k] += std::exp(0.5 * (frac * log_large + (1.0 - frac) * log_small)) * noise.normal();
        }
        break;
      }
    }
  }
  return {std::move(x_prev), std::move(x0_tilde)};
}

namespace {

template <typename LabelAt>
ToyImage run_chain(const Denoiser& denoiser, int height, int width, const ImageSchedule& image_schedule,
                   const SamplerConfig& config, std::uint64_t sample_index, LabelAt&& label_at) {
  const std::vector<int> steps = respace(image_schedule.steps(), config.steps);
  CounterStream init(config.seed, "sample.init", {sample_index});
  ToyImage x = standard_normal_image(height, width, denoiser.channels(), init);
  ReverseState state;
  for (std::size_t k = steps.size(); k-- > 0;) {
    const int t = steps[k];
    const int t_prev = k > 0 ? steps[k - 1] : 0;
    const SemanticMap y_t = label_at(t, state.first_step);
    CounterStream noise(config.seed, "sample.noise", {sample_index, static_cast<std::uint64_t>(t)});
    ReverseResult r = reverse_step(denoiser, x, y_t, t, t_prev, image_schedule, config, state, noise);
    x = std::move(r.x_prev);
    state.x0_tilde_prev = std::move(r.x0_tilde);
    state.first_step = false;
  }
  return x;
}

}  // namespace

ToyImage sample(const Denoiser& denoiser, const SemanticMap& y0, const LabelSchedule& label_schedule,
                const ImageSchedule& image_schedule, const SamplerConfig& config, std::uint64_t sample_index) {
  if (label_schedule.steps() != image_schedule.steps()) throw ArgumentError("sample: label and image schedules disagree on T");
  if (y0.has_mask()) throw ArgumentError("sample: y0 must not contain MASK");
  if (y0.num_classes() != denoiser.num_classes()) throw ArgumentError("sample: class count mismatch");

  const RngKey key{config.seed, sample_index};
  const bool force = config.force_full_mask_at_T && label_schedule.has_label_diffusion();
  std::optional<MaskTimeMatrix> times;
  if (config.coupling == Coupling::coupled) times = sample_mask_times(y0, label_schedule, key);

  return run_chain(denoiser, y0.height(), y0.width(), image_schedule, config, sample_index,
                   [&](int t, bool first) {
                     if (first && force) return SemanticMap::all_masked(y0.height(), y0.width(), y0.num_classes());
                     if (times) return reconstruct(*times, y0, t);
                     return diffuse_to(y0, label_schedule, t, key);
                   });
}

ToyImage sample_fixed_label(const Denoiser& denoiser, const SemanticMap& y0, const ImageSchedule& image_schedule,
                            const SamplerConfig& config, std::uint64_t sample_index) {
  if (y0.num_classes() != denoiser.num_classes()) throw ArgumentError("sample_fixed_label: class count mismatch");
  return run_chain(denoiser, y0.height(), y0.width(), image_schedule, config, sample_index,
                   [&](int, bool) { return y0; });
}

}  // namespace scdm
