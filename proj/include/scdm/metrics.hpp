// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scdm/image.hpp"
#include "scdm/labelmap.hpp"

namespace scdm {

enum class ClassGroup { frequent, common, rare };

std::string to_string(ClassGroup group);

struct GroupAssignment {
  std::vector<ClassGroup> group;  // per class
};

/// Ranks classes by psi*phi (ascending, ties by class id) and splits the
/// ranking at the given fractions; the default is terciles.
GroupAssignment assign_groups(std::span<const double> products, double frequent_fraction = 1.0 / 3.0,
                              double rare_fraction = 1.0 / 3.0);

struct GroupedMiou {
  std::optional<double> all;
  std::optional<double> frequent;
  std::optional<double> common;
  std::optional<double> rare;
};

/// mIoU overall and restricted to each group; a group with no evaluable class
/// is absent rather than zero.
GroupedMiou grouped_miou(const SemanticMap& pred, const SemanticMap& truth, const GroupAssignment& groups,
                         std::optional<int> ignore = std::nullopt);

/// Serialization cap for the identical-image case.
inline constexpr double kPsnrCapDb = 99.0;

/// 10 log10(range^2 / MSE); +infinity when the images are identical.
double psnr(const ToyImage& a, const ToyImage& b, double data_range);
double mean_squared_error(const ToyImage& a, const ToyImage& b);

enum class SsimWindow { uniform, gaussian };

struct SsimOptions {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 2.0;
  SsimWindow kind = SsimWindow::uniform;
  double gaussian_sigma = 1.5;
};

/// Mean SSIM over all fully contained window positions, averaged over
/// channels. Local statistics use the unbiased (n-1) covariance.
double ssim(const ToyImage& a, const ToyImage& b, const SsimOptions& options = {});

/// Squared 2-Wasserstein distance between Gaussian fits of two feature sets
/// (rows are samples). Covariances use n-1; when a set has no more samples
/// than dimensions, eps I with eps = 1e-6 tr(S)/d is added.
double frechet_gaussian(const Eigen::MatrixXd& set_a, const Eigen::MatrixXd& set_b);

/// The same distance from given moments.
double frechet_from_moments(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mean_b,
                            const Eigen::MatrixXd& cov_b);

}  // namespace scdm
