// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/schedule.hpp"

#include <algorithm>
#include <cstring>
#include <numbers>

#include <json.hpp>

#include "scdm/io_util.hpp"
#include "scdm/rng.hpp"

namespace scdm {

double gamma_eval(double product, Eta eta, int t, int T, ClassMode mode) {
  if (T < 1 || t < 1 || t > T) throw ArgumentError("gamma_eval: step out of range");
  const double ratio = static_cast<double>(t - 1) / static_cast<double>(T);
  if (mode == ClassMode::none || eta.is_infinite()) return 0.0;
  if (mode == ClassMode::uniform) return ratio;
  if (!std::isfinite(product) || !(product > 1.0)) {
    throw ArgumentError("gamma_eval: class-wise schedule needs psi*phi > 1, got " + std::to_string(product));
  }
  const double g = classwise_gamma(product, eta.value(), ratio);
  if (!std::isfinite(g)) throw NumericError("gamma_eval: non-finite result");
  return g;
}

LabelSchedule LabelSchedule::from_table(Eigen::MatrixXd gamma, Eta eta, std::vector<ClassMode> modes,
                                        std::vector<double> products) {
  if (gamma.rows() < 1 || gamma.cols() < 1) throw ArgumentError("label schedule needs T >= 1 and C >= 1");
  if (!gamma.allFinite() || (gamma.array() < 0.0).any() || (gamma.array() > 1.0).any()) {
    throw ArgumentError("label schedule entries must lie in [0, 1]");
  }
  for (Eigen::Index t = 1; t < gamma.rows(); ++t) {
    if ((gamma.row(t).array() < gamma.row(t - 1).array()).any()) {
      throw ArgumentError("label schedule must be nondecreasing in t");
    }
  }
  const auto nc = static_cast<std::size_t>(gamma.cols());
  if (modes.empty()) modes.assign(nc, eta.is_infinite() ? ClassMode::none : ClassMode::class_wise);
  if (products.empty()) products.assign(nc, 0.0);
  if (modes.size() != nc || products.size() != nc) throw ArgumentError("label schedule metadata size mismatch");
  return LabelSchedule(std::move(gamma), eta, std::move(modes), std::move(products));
}

std::uint64_t LabelSchedule::fingerprint() const {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(steps()) * 1000003u + static_cast<std::uint64_t>(num_classes()));
  for (Eigen::Index k = 0; k < gamma_.size(); ++k) {
    std::uint64_t bits;
    const double v = gamma_.data()[k];
    std::memcpy(&bits, &v, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

LabelSchedule build_label_schedule(std::span<const double> products, int T, Eta eta,
                                   const std::set<int>& uniform_classes) {
  if (T < 1) throw ArgumentError("build_label_schedule: T must be >= 1");
  const auto C = static_cast<int>(products.size());
  if (C < 1) throw ArgumentError("build_label_schedule: no classes");
  for (int c : uniform_classes) {
    if (c < 0 || c >= C) throw ArgumentError("build_label_schedule: uniform class out of range");
  }
  std::vector<ClassMode> modes(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    if (eta.is_infinite()) {
      modes[static_cast<std::size_t>(c)] = ClassMode::none;
    } else {
      modes[static_cast<std::size_t>(c)] = uniform_classes.contains(c) ? ClassMode::uniform : ClassMode::class_wise;
    }
  }
  Eigen::MatrixXd gamma(T, C);
  for (int c = 0; c < C; ++c) {
    for (int t = 1; t <= T; ++t) {
      gamma(t - 1, c) = gamma_eval(products[static_cast<std::size_t>(c)], eta, t, T, modes[static_cast<std::size_t>(c)]);
    }
  }
  return LabelSchedule::from_table(std::move(gamma), eta, std::move(modes),
                                   std::vector<double>(products.begin(), products.end()));
}

LabelSchedule build_label_schedule(const ClassStats& stats, int T, Eta eta, const std::set<int>& uniform_classes) {
  const auto products = stats.products();
  return build_label_schedule(products, T, eta, uniform_classes);
}

LabelSchedule uniform_label_schedule(int num_classes, int T) {
  std::set<int> all;
  for (int c = 0; c < num_classes; ++c) all.insert(c);
  const std::vector<double> products(static_cast<std::size_t>(num_classes), 0.0);
  return build_label_schedule(products, T, Eta::finite(1.0), all);
}

double step_beta(const LabelSchedule& schedule, int t, int c) {
  if (t < 1 || t > schedule.steps()) throw ArgumentError("step_beta: step out of range");
  if (c < 0 || c >= schedule.num_classes()) throw ArgumentError("step_beta: class out of range");
  if (t == 1) return schedule.gamma(1, c);
  const double prev = schedule.gamma(t - 1, c);
  if (prev >= 1.0) throw InvariantError("step_beta: gamma reached 1 before step " + std::to_string(t));
  return 1.0 - (1.0 - schedule.gamma(t, c)) / (1.0 - prev);
}

Eigen::MatrixXd transition_matrix(const LabelSchedule& schedule, int t) {
  Eigen::VectorXd beta(schedule.num_classes());
  for (int c = 0; c < schedule.num_classes(); ++c) beta(c) = step_beta(schedule, t, c);
  return transition_matrix<double>(beta);
}

Eigen::MatrixXd cumulative_from_gamma(const Eigen::VectorXd& gamma) {
  // Same sparsity pattern as a single step, with gamma in place of beta.
  return transition_matrix<double>(gamma);
}

Eigen::MatrixXd cumulative_marginal(const LabelSchedule& schedule, int t) {
  if (t < 1 || t > schedule.steps()) throw ArgumentError("cumulative_marginal: step out of range");
  return cumulative_from_gamma(schedule.table().row(t - 1).transpose());
}

Eigen::MatrixXd marginal_by_product(const LabelSchedule& schedule, int t) {
  if (t < 1 || t > schedule.steps()) throw ArgumentError("marginal_by_product: step out of range");
  Eigen::MatrixXd acc = transition_matrix(schedule, 1);
  for (int s = 2; s <= t; ++s) acc = transition_matrix(schedule, s) * acc;
  return acc;
}

Prop1Report verify_prop1(double product, int T, double tolerance) {
  Prop1Report report;
  report.product = product;
  report.steps = T;
  report.tolerance = tolerance;
  for (int t = 1; t <= T; ++t) {
    const double ratio = static_cast<double>(t - 1) / T;
    const double small = gamma_eval(product, Eta::finite(report.small_eta), t, T);
    const double large = gamma_eval(product, Eta::finite(report.large_eta), t, T);
    report.max_small_eta_error = std::max(report.max_small_eta_error, std::abs(small - ratio));
    report.max_large_eta_gamma = std::max(report.max_large_eta_gamma, std::abs(large));
  }
  report.passed = report.max_small_eta_error <= tolerance && report.max_large_eta_gamma <= tolerance;
  return report;
}

ImageScheduleParams default_linear_params(int T) {
  if (T < 1) throw ArgumentError("default_linear_params: T must be >= 1");
  const double scale = 1000.0 / T;
  ImageScheduleParams p;
  p.beta_start = std::min(1e-4 * scale, 0.5);
  p.beta_end = std::min(0.02 * scale, 0.999);
  return p;
}

ImageSchedule ImageSchedule::from_alpha_bar(Eigen::VectorXd alpha_bar, ImageScheduleKind kind,
                                            ImageScheduleParams params) {
  if (alpha_bar.size() < 1) throw ArgumentError("image schedule needs T >= 1");
  if (!alpha_bar.allFinite() || (alpha_bar.array() <= 0.0).any() || (alpha_bar.array() > 1.0).any()) {
    throw ArgumentError("alpha_bar entries must lie in (0, 1]");
  }
  for (Eigen::Index t = 1; t < alpha_bar.size(); ++t) {
    if (!(alpha_bar(t) < alpha_bar(t - 1))) throw ArgumentError("alpha_bar must be strictly decreasing");
  }
  return ImageSchedule(std::move(alpha_bar), kind, params);
}

double ImageSchedule::posterior_variance(int t, int s) const {
  if (t < 1 || t > steps() || s < 0 || s >= t) throw ArgumentError("posterior_variance: need 0 <= s < t <= T");
  const double at = alpha_bar(t);
  const double as = alpha_bar(s);
  const double beta = 1.0 - at / as;
  if (at >= 1.0) return 0.0;
  return std::max(0.0, (1.0 - as) / (1.0 - at) * beta);
}

ImageSchedule build_image_schedule(int T, ImageScheduleKind kind, const ImageScheduleParams& params) {
  if (T < 1) throw ArgumentError("build_image_schedule: T must be >= 1");
  Eigen::VectorXd alpha_bar(T);
  if (kind == ImageScheduleKind::linear_beta) {
    if (!(params.beta_start > 0.0 && params.beta_start < 1.0 && params.beta_end > 0.0 && params.beta_end < 1.0)) {
      throw ArgumentError("linear_beta: betas must lie in (0, 1)");
    }
    double acc = 1.0;
    for (int t = 0; t < T; ++t) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(t) / (T - 1);
      const double beta = params.beta_start + frac * (params.beta_end - params.beta_start);
      acc *= 1.0 - beta;
      alpha_bar(t) = acc;
    }
  } else {
    const double s = params.cosine_offset;
    if (!(s > 0.0)) throw ArgumentError("cosine: offset must be positive");
    auto f = [&](double t) {
      const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
      return c * c;
    };
    double acc = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double beta = std::min(1.0 - f(t) / f(t - 1), 0.999);
      acc *= 1.0 - beta;
      alpha_bar(t - 1) = acc;
    }
  }
  if ((alpha_bar.array() <= 0.0).any()) throw ArgumentError("build_image_schedule: alpha_bar underflowed to 0");
  return ImageSchedule::from_alpha_bar(std::move(alpha_bar), kind, params);
}

ImageSchedule build_image_schedule(int T, ImageScheduleKind kind) {
  return build_image_schedule(T, kind, kind == ImageScheduleKind::linear_beta ? default_linear_params(T)
                                                                             : ImageScheduleParams{});
}

std::string to_string(ImageScheduleKind kind) {
  return kind == ImageScheduleKind::linear_beta ? "linear_beta" : "cosine";
}

ImageScheduleKind image_schedule_kind_from_string(const std::string& name) {
  if (name == "linear_beta" || name == "linear") return ImageScheduleKind::linear_beta;
  if (name == "cosine") return ImageScheduleKind::cosine;
  throw ArgumentError("unknown image schedule kind: " + name);
}

namespace {

std::string mode_name(ClassMode m) {
  switch (m) {
    case ClassMode::class_wise:
      return "class_wise";
    case ClassMode::uniform:
      return "uniform";
    case ClassMode::none:
      return "none";
  }
  return "none";
}

ClassMode mode_from_name(const std::string& s) {
  if (s == "class_wise") return ClassMode::class_wise;
  if (s == "uniform") return ClassMode::uniform;
  if (s == "none") return ClassMode::none;
  throw FormatError("unknown class mode: " + s);
}

}  // namespace

std::string schedule_to_json(const LabelSchedule& label, const ImageSchedule& image) {
  if (label.steps() != image.steps()) throw ArgumentError("label and image schedules disagree on T");
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["T"] = label.steps();
  j["eta"] = label.eta().is_infinite() ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(label.eta().value());
  j["num_classes"] = label.num_classes();
  auto rows = nlohmann::ordered_json::array();
  for (int t = 1; t <= label.steps(); ++t) {
    std::vector<double> row(static_cast<std::size_t>(label.num_classes()));
    for (int c = 0; c < label.num_classes(); ++c) row[static_cast<std::size_t>(c)] = label.gamma(t, c);
    rows.push_back(row);
  }
  j["gamma"] = rows;
  std::vector<std::string> modes;
  for (auto m : label.modes()) modes.push_back(mode_name(m));
  j["modes"] = modes;
  j["products"] = label.products();
  const auto& ab = image.alpha_bar_table();
  j["alpha_bar"] = std::vector<double>(ab.data(), ab.data() + ab.size());
  j["kind"] = to_string(image.kind());
  j["params"] = {{"beta_start", image.params().beta_start},
                 {"beta_end", image.params().beta_end},
                 {"cosine_offset", image.params().cosine_offset}};
  return j.dump(1) + "\n";
}

ScheduleBundle schedule_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("schedule file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported schedule version");
    const int T = j.at("T").get<int>();
    const auto& eta_j = j.at("eta");
    const Eta eta = eta_j.is_string() ? (eta_j.get<std::string>() == "inf" ? Eta::infinite()
                                                                           : throw FormatError("eta must be a number or \"inf\""))
                                      : Eta::finite(eta_j.get<double>());
    const auto rows = j.at("gamma").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != T || rows.empty()) throw FormatError("gamma table does not have T rows");
    const auto C = static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd gamma(T, C);
    for (int t = 0; t < T; ++t) {
      if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(t)].size()) != C) throw FormatError("ragged gamma table");
      for (Eigen::Index c = 0; c < C; ++c) gamma(t, c) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
    }
    std::vector<ClassMode> modes;
    if (j.contains("modes")) {
      for (const auto& m : j.at("modes")) modes.push_back(mode_from_name(m.get<std::string>()));
    }
    std::vector<double> products;
    if (j.contains("products")) products = j.at("products").get<std::vector<double>>();
    auto label = LabelSchedule::from_table(std::move(gamma), eta, std::move(modes), std::move(products));

    const auto ab = j.at("alpha_bar").get<std::vector<double>>();
    ImageScheduleParams params;
    if (j.contains("params")) {
      const auto& p = j.at("params");
      params.beta_start = p.value("beta_start", params.beta_start);
      params.beta_end = p.value("beta_end", params.beta_end);
      params.cosine_offset = p.value("cosine_offset", params.cosine_offset);
    }
    auto image = ImageSchedule::from_alpha_bar(Eigen::Map<const Eigen::VectorXd>(ab.data(), static_cast<Eigen::Index>(ab.size())),
                                               image_schedule_kind_from_string(j.at("kind").get<std::string>()), params);
    if (image.steps() != T) throw FormatError("alpha_bar length does not match T");
    return {std::move(label), std::move(image)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("schedule file missing or mistyped field: ") + e.what());
  }
}

void save_schedule(const LabelSchedule& label, const ImageSchedule& image, const std::filesystem::path& path) {
  write_atomic(path, schedule_to_json(label, image));
}

ScheduleBundle load_schedule(const std::filesystem::path& path) { return schedule_from_json(read_text(path)); }

}  // namespace scdm
