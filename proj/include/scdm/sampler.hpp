// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scdm/denoiser.hpp"
#include "scdm/image.hpp"
#include "scdm/labeldiff.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

enum class VarianceMode { fixed_small, fixed_large, learned };

/// How y_t is drawn during sampling: one mask-time matrix for the whole run
/// (coupled) or an independent marginal draw at every step (fresh).
enum class Coupling { coupled, fresh };

struct SamplerConfig {
  int steps = 50;
  double cfg_scale = 0.5;
  double extrapolation = 0.0;
  double threshold_percentile = 0.95;
  VarianceMode variance = VarianceMode::fixed_small;
  Coupling coupling = Coupling::coupled;
  bool force_full_mask_at_T = true;
  std::uint64_t seed = 0;
};

std::string to_string(VarianceMode mode);
VarianceMode variance_mode_from_string(const std::string& name);
std::string to_string(Coupling coupling);
Coupling coupling_from_string(const std::string& name);

/// Evenly spaced, strictly increasing subsequence of 1..T that contains T,
/// and 1 whenever steps >= 2.
std::vector<int> respace(int T, int steps);

/// eps_c + s (eps_c - eps_u), with eps_u from the all-MASK map.
ToyImage guided_epsilon(const Denoiser& denoiser, const ToyImage& x_t, const SemanticMap& y_t, int t, double scale,
                        DenoiserOutput* conditional = nullptr);

/// Linear-interpolation quantile (numpy's default) of |values|.
double abs_quantile(const ToyImage& image, double p);

/// If the p-quantile q of |x0| exceeds 1, clip to [-q, q] and divide by q.
ToyImage dynamic_threshold(const ToyImage& x0, double percentile);

struct ReverseState {
  std::optional<ToyImage> x0_tilde_prev;
  bool first_step = true;
};

struct ReverseResult {
  ToyImage x_prev;
  ToyImage x0_tilde;
};

/// One guided reverse step t -> t_prev (t_prev = 0 at the end). `noise`
/// supplies the standard normal draw and is not touched at the final step.
ReverseResult reverse_step(const Denoiser& denoiser, const ToyImage& x_t, const SemanticMap& y_t, int t, int t_prev,
                           const ImageSchedule& schedule, const SamplerConfig& config, const ReverseState& state,
                           CounterStream& noise);

/// Full generation from a clean map: labels follow the forward label process
/// while the image runs the reverse chain. Pure function of its inputs and
/// (config.seed, sample_index).
ToyImage sample(const Denoiser& denoiser, const SemanticMap& y0, const LabelSchedule& label_schedule,
                const ImageSchedule& image_schedule, const SamplerConfig& config, std::uint64_t sample_index = 0);

/// Reference conditional sampler that feeds y0 unchanged at every step.
ToyImage sample_fixed_label(const Denoiser& denoiser, const SemanticMap& y0, const ImageSchedule& image_schedule,
                            const SamplerConfig& config, std::uint64_t sample_index = 0);

}  // namespace scdm
