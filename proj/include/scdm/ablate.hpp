// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scdm/corrupt.hpp"
#include "scdm/denoiser.hpp"
#include "scdm/labelmap.hpp"
#include "scdm/run_config.hpp"
#include "scdm/sampler.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

/// A few axis-aligned rectangles over a random background. Class 0 plays the
/// unlabeled role and only shows up as occasional small patches.
SemanticMap random_rect_map(int height, int width, int num_classes, CounterStream& rng);
std::vector<SemanticMap> random_rect_corpus(int count, int height, int width, int num_classes, std::uint64_t seed);

struct AblationSetup {
  ClassStats stats;
  LabelSchedule label_diffusion;  // class-wise, eta = ablate_eta, class 0 uniform
  LabelSchedule baseline;         // eta = +inf
  ImageSchedule image;
  ToyDataSpec toy;
};

AblationSetup make_ablation_setup(const RunConfig& config);

struct PairedStats {
  int pairs = 0;
  double mean_sq_distance = 0.0;  // clean vs corrupted sample, per component
  double stderr_sq_distance = 0.0;
  double mean_psnr = 0.0;         // capped at kPsnrCapDb
  double fidelity_mse = 0.0;      // clean sample vs class-mean image
  double label_miou = 0.0;        // corrupted vs clean label map
  std::optional<bool> baseline_identical;  // set when the identity check ran
};

/// Shared-seed paired sampling: pair p uses map p, corruption key p and
/// sample index p for both the clean and the corrupted condition.
PairedStats paired_robustness(const AblationSetup& setup, const LabelSchedule& schedule, const SamplerConfig& sampler,
                              const CorruptionConfig& corruption, int pairs, const RunConfig& config,
                              int identity_checks = 0);

struct AblationRow {
  std::string mode;
  std::string method;
  std::string eta;
  double extrapolation = 0.0;
  int steps = 0;
  PairedStats stats;
};

std::vector<int> ablation_step_counts(const RunConfig& config);
std::vector<AblationRow> run_ablation(const RunConfig& config);
/// CSV with a one-line "# {header json}" schema line.
std::string ablation_csv(const std::vector<AblationRow>& rows, const RunConfig& config);

}  // namespace scdm
