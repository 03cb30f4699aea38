// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scdm/errors.hpp"
#include "scdm/labelmap.hpp"

namespace scdm {

/// Schedule sharpness. The infinite value means "no label diffusion": every
/// gamma is zero and labels stay clean for all t.
class Eta {
 public:
  static Eta finite(double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw ArgumentError("eta must be a finite nonnegative number");
    return Eta(value, false);
  }
  static Eta infinite() { return Eta(0.0, true); }

  bool is_infinite() const { return infinite_; }
  double value() const { return value_; }
  bool operator==(const Eta&) const = default;

 private:
  Eta(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

enum class ClassMode { class_wise, uniform, none };

/// ((p^(eta*r) - 1) / (p^eta - 1)) for base p > 1 and ratio r in [0, 1].
/// Small exponents go through expm1; large ones are rewritten as
/// p^(eta*(r-1)) * (1 - p^(-eta*r)) / (1 - p^(-eta)), which cannot overflow.
template <typename Scalar>
Scalar classwise_gamma(Scalar product, Scalar eta, Scalar ratio) {
  using std::exp;
  using std::expm1;
  using std::log;
  if (ratio <= Scalar(0)) return Scalar(0);
  if (eta == Scalar(0)) return ratio;
  const Scalar a = eta * log(product);
  if (a < Scalar(1)) return expm1(a * ratio) / expm1(a);
  return exp(a * (ratio - Scalar(1))) * (-expm1(-a * ratio)) / (-expm1(-a));
}

/// Masking probability for step t in 1..T under the t-1 convention: the ratio
/// used is (t-1)/T, so stored values never reach 1.
double gamma_eval(double product, Eta eta, int t, int T, ClassMode mode = ClassMode::class_wise);

/// Per-class cumulative masking probabilities gamma_{t,c}, t = 1..T.
class LabelSchedule {
 public:
  /// Wraps an explicit T x C table; rows must be nondecreasing with entries
  /// in [0, 1].
  static LabelSchedule from_table(Eigen::MatrixXd gamma, Eta eta = Eta::finite(1.0),
                                  std::vector<ClassMode> modes = {}, std::vector<double> products = {});

  int steps() const { return static_cast<int>(gamma_.rows()); }
  int num_classes() const { return static_cast<int>(gamma_.cols()); }
  Eta eta() const { return eta_; }
  ClassMode mode(int c) const { return modes_[static_cast<std::size_t>(c)]; }
  const std::vector<ClassMode>& modes() const { return modes_; }
  const std::vector<double>& products() const { return products_; }

  /// gamma_{t,c} with 1-based t; t = 0 returns 0.
  double gamma(int t, int c) const {
    if (t <= 0) return 0.0;
    return gamma_(t - 1, c);
  }
  const Eigen::MatrixXd& table() const { return gamma_; }

  bool has_label_diffusion() const { return (gamma_.array() > 0.0).any(); }
  std::uint64_t fingerprint() const;

 private:
  LabelSchedule(Eigen::MatrixXd gamma, Eta eta, std::vector<ClassMode> modes, std::vector<double> products)
      : gamma_(std::move(gamma)), eta_(eta), modes_(std::move(modes)), products_(std::move(products)) {}

  Eigen::MatrixXd gamma_;
  Eta eta_;
  std::vector<ClassMode> modes_;
  std::vector<double> products_;
};

LabelSchedule build_label_schedule(std::span<const double> products, int T, Eta eta,
                                   const std::set<int>& uniform_classes = {});
LabelSchedule build_label_schedule(const ClassStats& stats, int T, Eta eta, const std::set<int>& uniform_classes = {});
LabelSchedule uniform_label_schedule(int num_classes, int T);

/// One-step masking probability recovered from the cumulative table.
double step_beta(const LabelSchedule& schedule, int t, int c);

/// (C+1) x (C+1) column-stochastic matrix; column j is the law of the next
/// state given current state j. Index C is MASK.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> transition_matrix(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& beta) {
  const Eigen::Index C = beta.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> q =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(C + 1, C + 1);
  for (Eigen::Index c = 0; c < C; ++c) {
    q(c, c) = Scalar(1) - beta(c);
    q(C, c) = beta(c);
  }
  q(C, C) = Scalar(1);
  return q;
}

Eigen::MatrixXd transition_matrix(const LabelSchedule& schedule, int t);

/// Closed form of Q_t ... Q_1: (1 - gamma) on the class diagonal and gamma
/// into MASK.
Eigen::MatrixXd cumulative_marginal(const LabelSchedule& schedule, int t);
Eigen::MatrixXd cumulative_from_gamma(const Eigen::VectorXd& gamma);

/// The same matrix by explicit multiplication of the one-step matrices.
Eigen::MatrixXd marginal_by_product(const LabelSchedule& schedule, int t);

struct Prop1Report {
  double product = 0.0;
  int steps = 0;
  double small_eta = 1e-8;
  double large_eta = 1e4;
  double max_small_eta_error = 0.0;  // max_t |gamma - (t-1)/T|
  double max_large_eta_gamma = 0.0;  // max_t gamma
  double tolerance = 0.0;
  bool passed = false;
};

/// Checks the eta -> 0 (linear) and eta -> infinity (no diffusion) limits.
Prop1Report verify_prop1(double product, int T, double tolerance);

enum class ImageScheduleKind { linear_beta, cosine };

struct ImageScheduleParams {
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double cosine_offset = 0.008;
};

/// Linear-beta parameters rescaled by 1000/T so short schedules still end
/// near pure noise; identical to (1e-4, 0.02) at T = 1000.
ImageScheduleParams default_linear_params(int T);

class ImageSchedule {
 public:
  static ImageSchedule from_alpha_bar(Eigen::VectorXd alpha_bar, ImageScheduleKind kind = ImageScheduleKind::linear_beta,
                                      ImageScheduleParams params = {});

  int steps() const { return static_cast<int>(alpha_bar_.size()); }
  ImageScheduleKind kind() const { return kind_; }
  const ImageScheduleParams& params() const { return params_; }
  const Eigen::VectorXd& alpha_bar_table() const { return alpha_bar_; }

  /// Cumulative signal level; alpha_bar(0) = 1.
  double alpha_bar(int t) const { return t <= 0 ? 1.0 : alpha_bar_(t - 1); }
  double alpha_ratio(int t) const { return alpha_bar(t) / alpha_bar(t - 1); }
  double beta(int t) const { return 1.0 - alpha_ratio(t); }

  /// Posterior q(x_s | x_t, x_0) variance for any s < t (respaced steps).
  double posterior_variance(int t, int s) const;
  double posterior_variance(int t) const { return posterior_variance(t, t - 1); }

 private:
  ImageSchedule(Eigen::VectorXd a, ImageScheduleKind k, ImageScheduleParams p)
      : alpha_bar_(std::move(a)), kind_(k), params_(p) {}

  Eigen::VectorXd alpha_bar_;
  ImageScheduleKind kind_;
  ImageScheduleParams params_;
};

ImageSchedule build_image_schedule(int T, ImageScheduleKind kind, const ImageScheduleParams& params);
ImageSchedule build_image_schedule(int T, ImageScheduleKind kind = ImageScheduleKind::linear_beta);

std::string to_string(ImageScheduleKind kind);
ImageScheduleKind image_schedule_kind_from_string(const std::string& name);

struct ScheduleBundle {
  LabelSchedule label;
  ImageSchedule image;
};

std::string schedule_to_json(const LabelSchedule& label, const ImageSchedule& image);
ScheduleBundle schedule_from_json(const std::string& text);
void save_schedule(const LabelSchedule& label, const ImageSchedule& image, const std::filesystem::path& path);
ScheduleBundle load_schedule(const std::filesystem::path& path);

}  // namespace scdm
