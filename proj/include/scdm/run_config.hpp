// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scdm/corrupt.hpp"
#include "scdm/image.hpp"
#include "scdm/sampler.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

/// Everything a command needs to reproduce its output. Serialized into every
/// artifact under "config".
struct RunConfig {
  std::uint64_t seed = 0;
  int T = 50;
  Eta eta = Eta::finite(1.0);
  ImageScheduleKind image_kind = ImageScheduleKind::linear_beta;
  SamplerConfig sampler;
  CorruptionConfig corruption;
  ToyDataSpec toy;
  std::string out_dir = ".";

  // Ablation harness.
  int height = 16;
  int width = 16;
  int pairs = 100;
  int corpus_size = 200;
  std::vector<int> step_counts;  // empty: {25, 50, T}, clipped to T
  double ablate_eta = 1.0;
  double ablate_extrapolation = 0.8;
  std::vector<std::string> ablate_modes = {"ds", "edge", "random"};

  RunConfig();
};

/// Even class means in [-0.9, 0.9], uniform prior, one channel.
ToyDataSpec default_toy_spec(int num_classes, double sigma0 = 0.3);

nlohmann::ordered_json run_config_to_json(const RunConfig& config);
/// Fields absent from `j` keep their value in `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
/// Accepts a plain config JSON, a JSON report with an embedded "config", or a
/// CSV artifact whose first line is "# " followed by its header JSON.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Header object embedded in every artifact: schema name, tool version and
/// the full config.
nlohmann::ordered_json artifact_header(const std::string& schema, const RunConfig& config);

}  // namespace scdm
