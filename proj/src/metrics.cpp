// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "scdm/errors.hpp"

namespace scdm {

std::string to_string(ClassGroup group) {
  switch (group) {
    case ClassGroup::frequent:
      return "frequent";
    case ClassGroup::common:
      return "common";
    case ClassGroup::rare:
      return "rare";
  }
  return "common";
}

GroupAssignment assign_groups(std::span<const double> products, double frequent_fraction, double rare_fraction) {
  if (products.empty()) throw ArgumentError("assign_groups: no classes");
  if (frequent_fraction < 0.0 || rare_fraction < 0.0 || frequent_fraction + rare_fraction > 1.0) {
    throw ArgumentError("assign_groups: group fractions must be nonnegative and sum to at most 1");
  }
  const std::size_t n = products.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return products[a] < products[b]; });
  const auto n_frequent = static_cast<std::size_t>(std::llround(frequent_fraction * static_cast<double>(n)));
  const auto n_rare = static_cast<std::size_t>(std::llround(rare_fraction * static_cast<double>(n)));
  GroupAssignment out;
  out.group.assign(n, ClassGroup::common);
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_frequent) {
      out.group[order[r]] = ClassGroup::frequent;
    } else if (r >= n - std::min(n_rare, n - n_frequent)) {
      out.group[order[r]] = ClassGroup::rare;
    }
  }
  return out;
}

GroupedMiou grouped_miou(const SemanticMap& pred, const SemanticMap& truth, const GroupAssignment& groups,
                         std::optional<int> ignore) {
  if (static_cast<int>(groups.group.size()) != truth.num_classes()) {
    throw ArgumentError("grouped_miou: group assignment does not cover every class");
  }
  const auto iou = class_iou(pred, truth, ignore);
  auto mean_of = [&](auto&& keep) -> std::optional<double> {
    double sum = 0.0;
    int n = 0;
    for (std::size_t c = 0; c < iou.size(); ++c) {
      if (iou[c] && keep(groups.group[c])) {
        sum += *iou[c];
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
  };
  GroupedMiou out;
  out.all = mean_of([](ClassGroup) { return true; });
  out.frequent = mean_of([](ClassGroup g) { return g == ClassGroup::frequent; });
  out.common = mean_of([](ClassGroup g) { return g == ClassGroup::common; });
  out.rare = mean_of([](ClassGroup g) { return g == ClassGroup::rare; });
  return out;
}

double mean_squared_error(const ToyImage& a, const ToyImage& b) {
  if (!a.same_shape(b)) throw ArgumentError("image dimensions differ");
  return (a.values() - b.values()).squaredNorm() / static_cast<double>(a.size());
}

double psnr(const ToyImage& a, const ToyImage& b, double data_range) {
  if (!(data_range > 0.0)) throw ArgumentError("psnr: data_range must be positive");
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const ToyImage& a, const ToyImage& b, const SsimOptions& options) {
  if (!a.same_shape(b)) throw ArgumentError("ssim: image dimensions differ");
  const int win = options.window;
  if (win < 2 || win > std::min(a.height(), a.width())) throw ArgumentError("ssim: window must be in [2, min(H, W)]");
  if (!(options.data_range > 0.0)) throw ArgumentError("ssim: data_range must be positive");

  Eigen::MatrixXd weights(win, win);
  if (options.kind == SsimWindow::uniform) {
    weights.setConstant(1.0 / (win * win));
  } else {
    const double center = (win - 1) / 2.0;
    for (int i = 0; i < win; ++i) {
      for (int j = 0; j < win; ++j) {
        const double d2 = (i - center) * (i - center) + (j - center) * (j - center);
        weights(i, j) = std::exp(-d2 / (2.0 * options.gaussian_sigma * options.gaussian_sigma));
      }
    }
    weights /= weights.sum();
  }
  // Unbiased local covariance for the uniform window.
  const double cov_norm = options.kind == SsimWindow::uniform ? (win * win) / (win * win - 1.0) : 1.0;
  const double c1 = std::pow(options.k1 * options.data_range, 2);
  const double c2 = std::pow(options.k2 * options.data_range, 2);

  double total = 0.0;
  long long count = 0;
  for (int ch = 0; ch < a.channels(); ++ch) {
    for (int i0 = 0; i0 + win <= a.height(); ++i0) {
      for (int j0 = 0; j0 + win <= a.width(); ++j0) {
        double mu_a = 0.0, mu_b = 0.0;
        for (int i = 0; i < win; ++i) {
          for (int j = 0; j < win; ++j) {
            mu_a += weights(i, j) * a(i0 + i, j0 + j, ch);
            mu_b += weights(i, j) * b(i0 + i, j0 + j, ch);
          }
        }
        double var_a = 0.0, var_b = 0.0, cov = 0.0;
        for (int i = 0; i < win; ++i) {
          for (int j = 0; j < win; ++j) {
            const double da = a(i0 + i, j0 + j, ch) - mu_a;
            const double db = b(i0 + i, j0 + j, ch) - mu_b;
            var_a += weights(i, j) * da * da;
            var_b += weights(i, j) * db * db;
            cov += weights(i, j) * da * db;
          }
        }
        var_a *= cov_norm;
        var_b *= cov_norm;
        cov *= cov_norm;
        total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-9 * scale) throw NumericError("frechet: covariance is not positive semidefinite");
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_from_moments(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mean_b,
                            const Eigen::MatrixXd& cov_b) {
  const Eigen::Index d = mean_a.size();
  if (mean_b.size() != d || cov_a.rows() != d || cov_a.cols() != d || cov_b.rows() != d || cov_b.cols() != d) {
    throw ArgumentError("frechet: moment dimensions differ");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
  const Eigen::MatrixXd inner = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-9 * scale) throw NumericError("frechet: product of covariances is not positive semidefinite");
  const double trace_sqrt = ev.cwiseMax(0.0).cwiseSqrt().sum();
  const double dist = (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(dist, 0.0);
}

double frechet_gaussian(const Eigen::MatrixXd& set_a, const Eigen::MatrixXd& set_b) {
  if (set_a.cols() != set_b.cols() || set_a.cols() < 1) throw ArgumentError("frechet: feature dimensions differ");
  if (set_a.rows() < 1 || set_b.rows() < 1) throw ArgumentError("frechet: empty feature set");
  auto moments = [](const Eigen::MatrixXd& s) {
    const Eigen::VectorXd mean = s.colwise().mean().transpose();
    const Eigen::MatrixXd centered = s.rowwise() - mean.transpose();
    const Eigen::Index n = s.rows();
    const Eigen::Index d = s.cols();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    if (n > 1) cov = centered.transpose() * centered / static_cast<double>(n - 1);
    if (n <= d) cov += Eigen::MatrixXd::Identity(d, d) * (1e-6 * cov.trace() / static_cast<double>(d));
    return std::pair{mean, cov};
  };
  const auto [ma, ca] = moments(set_a);
  const auto [mb, cb] = moments(set_b);
  return frechet_from_moments(ma, ca, mb, cb);
}

}  // namespace scdm
