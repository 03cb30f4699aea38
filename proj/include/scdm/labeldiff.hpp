// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "scdm/labelmap.hpp"
#include "scdm/rng.hpp"
#include "scdm/schedule.hpp"

namespace scdm {

// Stream purposes for the label samplers. A pixel's draw is addressed by
// (seed, purpose, map_id, [t,] flat pixel index).
inline constexpr std::string_view kPurposeLabelStep = "label.step";
inline constexpr std::string_view kPurposeLabelMarginal = "label.marginal";
inline constexpr std::string_view kPurposeLabelCoupled = "label.coupled";

/// One forward step: each unmasked cell of class c is masked with
/// probability beta_{t,c}. MASK cells stay masked.
SemanticMap diffuse_step(const SemanticMap& y_prev, const LabelSchedule& schedule, int t, const RngKey& key);

/// Direct draw from q(y_t | y_0): each cell masked with probability gamma_{t,c}.
SemanticMap diffuse_to(const SemanticMap& y0, const LabelSchedule& schedule, int t, const RngKey& key);

/// First-masking times of every pixel; encodes the whole trajectory y_{1:T}.
struct MaskTimeMatrix {
  using Grid = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Grid mask_time;  // values in 1..T, or never() = T + 1
  int steps = 0;
  std::uint64_t schedule_id = 0;

  int height() const { return static_cast<int>(mask_time.rows()); }
  int width() const { return static_cast<int>(mask_time.cols()); }
  std::int32_t never() const { return steps + 1; }
};

/// Inverse-CDF step: the smallest t with gamma_{t,c} > u, or T + 1.
std::int32_t mask_time_for(double u, const LabelSchedule& schedule, int c);

MaskTimeMatrix sample_mask_times(const SemanticMap& y0, const LabelSchedule& schedule, const RngKey& key);

/// y_t from the mask-time matrix; no randomness involved.
SemanticMap reconstruct(const MaskTimeMatrix& times, const SemanticMap& y0, int t);

/// Trajectory dump: SLM1 with C := T + 1, NEVER stored as T + 1, plus a
/// sidecar JSON describing the encoding.
void save_mask_times(const MaskTimeMatrix& times, const std::filesystem::path& slm_path,
                     const std::filesystem::path& sidecar_path);
MaskTimeMatrix load_mask_times(const std::filesystem::path& slm_path);

/// f(x) = softmax(W x) over C classes; MASK has probability 0.
class ImplicitClassifier {
 public:
  explicit ImplicitClassifier(Eigen::MatrixXd weight) : weight_(std::move(weight)) {}

  int num_classes() const { return static_cast<int>(weight_.rows()); }
  int dim() const { return static_cast<int>(weight_.cols()); }
  const Eigen::MatrixXd& weight() const { return weight_; }

  Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const;
  /// d f / d x, shape C x dim.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd weight_;
};

struct Prop2Report {
  Eigen::VectorXd lhs;     // E_{y_t | y_0}[grad log q(y_t | x)], analytic
  Eigen::VectorXd lhs_fd;  // same expectation with finite-difference gradients
  Eigen::VectorXd rhs;     // (1 - gamma) grad log f_{y0}(x)
  double identity_error = 0.0;
  double fd_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Expected implicit-classifier gradient under uniform masking, by exact
/// enumeration of y_t over the C + 1 states.
Prop2Report verify_prop2(const ImplicitClassifier& clf, const Eigen::VectorXd& x, int y0, double gamma_t,
                         double tolerance, double fd_step = 1e-5);

}  // namespace scdm
