// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace scdm {

struct VerifyConfig {
  double product = 651.3;  // prop1
  int T = 50;              // prop1
  double prop1_tolerance = 1e-5;
  int prop2_classifiers = 100;
  double prop2_tolerance = 1e-10;
  int marginal_schedules = 20;
  int trajectory_trials = 1000000;
  int marginal_trials = 100000;
  int oracle_probes = 50;
  std::uint64_t seed = 0;
};

struct CheckResult {
  std::string target;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

const std::vector<std::string>& verify_targets();

/// Runs the named checks in the order given. Unknown names throw
/// ArgumentError before anything runs; an empty list is also an error.
std::vector<CheckResult> run_verify(const std::vector<std::string>& targets, const VerifyConfig& config);

// Individual checks, each returning one or more results.
std::vector<CheckResult> check_prop1(const VerifyConfig& config);
std::vector<CheckResult> check_prop2(const VerifyConfig& config);
std::vector<CheckResult> check_marginal(const VerifyConfig& config);
std::vector<CheckResult> check_trajectory(const VerifyConfig& config);
std::vector<CheckResult> check_oracle(const VerifyConfig& config);
std::vector<CheckResult> check_gradcheck(const VerifyConfig& config);

nlohmann::ordered_json verify_config_to_json(const VerifyConfig& config);
nlohmann::ordered_json verify_report(const std::vector<CheckResult>& results, const VerifyConfig& config);

}  // namespace scdm
