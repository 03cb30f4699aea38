// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/denoiser.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "scdm/io_util.hpp"
#include "scdm/mlp.hpp"

namespace scdm {

OracleDenoiser::OracleDenoiser(ToyDataSpec spec, ImageSchedule schedule, std::optional<Eigen::VectorXd> mask_prior)
    : spec_(std::move(spec)), schedule_(std::move(schedule)) {
  spec_.validate();
  mask_prior_ = mask_prior ? *mask_prior : spec_.class_prior;
  if (mask_prior_.size() != spec_.num_classes() || (mask_prior_.array() < 0.0).any() || !(mask_prior_.sum() > 0.0)) {
    throw ArgumentError("oracle denoiser: invalid mask prior");
  }
  mask_prior_ /= mask_prior_.sum();
}

Eigen::RowVectorXd OracleDenoiser::posterior_mean(const Eigen::RowVectorXd& x_t, int label, double alpha_bar) const {
  const double s2 = spec_.sigma0 * spec_.sigma0;
  const double evidence_var = alpha_bar * s2 + (1.0 - alpha_bar);
  if (!(evidence_var > 0.0)) throw DegenerateError("oracle denoiser: alpha_bar * sigma0^2 + (1 - alpha_bar) is zero");
  const double root = std::sqrt(alpha_bar);
  auto class_mean = [&](int c) -> Eigen::RowVectorXd {
    return (root * s2 * x_t + (1.0 - alpha_bar) * spec_.class_means.row(c)) / evidence_var;
  };

  const int C = spec_.num_classes();
  if (label < C) return class_mean(label);

  // MASK: mixture over classes. Shared evidence variance, so only the squared
  // distance to sqrt(abar) m(c) matters.
  Eigen::VectorXd logw(C);
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < C; ++c) {
    if (mask_prior_(c) <= 0.0) {
      logw(c) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double d2 = (x_t - root * spec_.class_means.row(c)).squaredNorm();
    logw(c) = std::log(mask_prior_(c)) - 0.5 * d2 / evidence_var;
    top = std::max(top, logw(c));
  }
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x_t.size());
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    if (!std::isfinite(logw(c))) continue;
    const double w = std::exp(logw(c) - top);
    total += w;
    mean += w * class_mean(c);
  }
  return mean / total;
}

DenoiserOutput OracleDenoiser::predict(const ToyImage& x_t, const SemanticMap& y, int t) const {
  if (x_t.channels() != spec_.channels()) throw ArgumentError("oracle denoiser: channel mismatch");
  if (y.num_classes() != spec_.num_classes() || y.height() != x_t.height() || y.width() != x_t.width()) {
    throw ArgumentError("oracle denoiser: label map does not match image");
  }
  const double ab = schedule_.alpha_bar(t);
  if (ab >= 1.0) throw DegenerateError("oracle denoiser: epsilon undefined at alpha_bar = 1");
  const double root = std::sqrt(ab);
  const double noise_scale = std::sqrt(1.0 - ab);
  ToyImage eps(x_t.height(), x_t.width(), x_t.channels());
  for (Eigen::Index k = 0; k < x_t.pixels(); ++k) {
    const Eigen::RowVectorXd xk = x_t.values().row(k);
    const Eigen::RowVectorXd x0 = posterior_mean(xk, y[k], ab);
    eps.values().row(k) = (xk - root * x0) / noise_scale;
  }
  return {std::move(eps), std::nullopt};
}

std::unique_ptr<OracleDenoiser> oracle_denoiser(const ToyDataSpec& spec, const ImageSchedule& schedule,
                                                std::optional<Eigen::VectorXd> stats_prior) {
  return std::make_unique<OracleDenoiser>(spec, schedule, std::move(stats_prior));
}

std::unique_ptr<Denoiser> load_denoiser(const std::filesystem::path& path, const ImageSchedule& schedule) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("denoiser file is not valid JSON: ") + e.what());
  }
  const std::string flavor = j.value("flavor", "");
  if (flavor == "oracle") {
    if (!j.contains("toy_spec")) throw FormatError("oracle denoiser file needs toy_spec");
    return oracle_denoiser(toy_spec_from_json(j.at("toy_spec").dump()), schedule);
  }
  if (flavor == "mlp") {
    if (!j.contains("checkpoint")) throw FormatError("mlp denoiser file needs checkpoint");
    std::filesystem::path ckpt = j.at("checkpoint").get<std::string>();
    if (ckpt.is_relative()) ckpt = path.parent_path() / ckpt;
    return std::make_unique<MlpDenoiser>(load_checkpoint(ckpt));
  }
  throw FormatError("unknown denoiser flavor: " + flavor);
}

}  // namespace scdm
