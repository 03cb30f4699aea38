// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/labeldiff.hpp"

#include <limits>

#include <json.hpp>

#include "scdm/errors.hpp"
#include "scdm/io_util.hpp"

namespace scdm {

namespace {

double pixel_uniform(const RngKey& key, std::string_view purpose, std::initializer_list<std::uint64_t> indices) {
  CounterStream stream(key.seed, purpose, indices);
  return stream.uniform();
}

void check_step(const LabelSchedule& schedule, const SemanticMap& map, int t, const char* who) {
  if (t < 1 || t > schedule.steps()) throw ArgumentError(std::string(who) + ": step out of range");
  if (map.num_classes() != schedule.num_classes()) {
    throw ArgumentError(std::string(who) + ": map and schedule disagree on class count");
  }
}

}  // namespace

SemanticMap diffuse_step(const SemanticMap& y_prev, const LabelSchedule& schedule, int t, const RngKey& key) {
  check_step(schedule, y_prev, t, "diffuse_step");
  Eigen::VectorXd beta(schedule.num_classes());
  for (int c = 0; c < schedule.num_classes(); ++c) beta(c) = step_beta(schedule, t, c);

  SemanticMap out = y_prev;
  const ClassId mask = y_prev.mask();
  for (Eigen::Index k = 0; k < y_prev.size(); ++k) {
    const ClassId v = y_prev[k];
    if (v == mask) continue;
    const double u = pixel_uniform(key, kPurposeLabelStep,
                                   {key.map_id, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k)});
    if (u < beta(v)) out.set_flat(k, mask);
  }
  return out;
}

SemanticMap diffuse_to(const SemanticMap& y0, const LabelSchedule& schedule, int t, const RngKey& key) {
  check_step(schedule, y0, t, "diffuse_to");
  if (y0.has_mask()) throw ArgumentError("diffuse_to: y0 must not contain MASK");
  SemanticMap out = y0;
  const ClassId mask = y0.mask();
  for (Eigen::Index k = 0; k < y0.size(); ++k) {
    const double g = schedule.gamma(t, y0[k]);
    if (g <= 0.0) continue;
    const double u = pixel_uniform(key, kPurposeLabelMarginal,
                                   {key.map_id, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(k)});
    if (u < g) out.set_flat(k, mask);
  }
  return out;
}

std::int32_t mask_time_for(double u, const LabelSchedule& schedule, int c) {
  // gamma is nondecreasing in t, so binary search for the first exceedance.
  int lo = 1;
  int hi = schedule.steps() + 1;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (schedule.gamma(mid, c) > u) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

MaskTimeMatrix sample_mask_times(const SemanticMap& y0, const LabelSchedule& schedule, const RngKey& key) {
  if (y0.num_classes() != schedule.num_classes()) {
    throw ArgumentError("sample_mask_times: map and schedule disagree on class count");
  }
  if (y0.has_mask()) throw ArgumentError("sample_mask_times: y0 must not contain MASK");
  MaskTimeMatrix out;
  out.steps = schedule.steps();
  out.schedule_id = schedule.fingerprint();
  out.mask_time.resize(y0.height(), y0.width());
  for (Eigen::Index k = 0; k < y0.size(); ++k) {
    const double u = pixel_uniform(key, kPurposeLabelCoupled, {key.map_id, static_cast<std::uint64_t>(k)});
    out.mask_time.data()[k] = mask_time_for(u, schedule, y0[k]);
  }
  return out;
}

SemanticMap reconstruct(const MaskTimeMatrix& times, const SemanticMap& y0, int t) {
  if (times.height() != y0.height() || times.width() != y0.width()) {
    throw ArgumentError("reconstruct: mask-time matrix and map differ in shape");
  }
  if (t < 0 || t > times.steps) throw ArgumentError("reconstruct: step out of range");
  LabelGrid cells = (times.mask_time <= t).select(LabelGrid::Constant(y0.height(), y0.width(), y0.mask()), y0.cells());
  return SemanticMap(std::move(cells), y0.num_classes());
}

void save_mask_times(const MaskTimeMatrix& times, const std::filesystem::path& slm_path,
                     const std::filesystem::path& sidecar_path) {
  LabelGrid grid = times.mask_time.cast<ClassId>();
  save_map(SemanticMap(std::move(grid), times.steps + 1), slm_path);
  nlohmann::ordered_json meta;
  meta["comment"] = "SLM1 cells are first-masking timesteps in 1..T; the value T+1 (the file's C) means never masked";
  meta["T"] = times.steps;
  meta["never"] = times.steps + 1;
  meta["schedule_id"] = times.schedule_id;
  meta["version"] = std::string(kVersion);
  write_atomic(sidecar_path, meta.dump(2) + "\n");
}

MaskTimeMatrix load_mask_times(const std::filesystem::path& slm_path) {
  const SemanticMap raw = load_map(slm_path);
  MaskTimeMatrix out;
  out.steps = raw.num_classes() - 1;
  out.mask_time = raw.cells().cast<std::int32_t>();
  if ((out.mask_time < 1).any()) throw CorruptDataError("mask-time dump contains step 0");
  return out;
}

Eigen::VectorXd ImplicitClassifier::probabilities(const Eigen::VectorXd& x) const {
  if (x.size() != weight_.cols()) throw ArgumentError("classifier input dimension mismatch");
  const Eigen::VectorXd logits = weight_ * x;
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::MatrixXd ImplicitClassifier::jacobian(const Eigen::VectorXd& x) const {
  // d softmax_k / dx = f_k (W_k - sum_j f_j W_j)
  const Eigen::VectorXd f = probabilities(x);
  const Eigen::RowVectorXd mean_row = f.transpose() * weight_;
  return f.asDiagonal() * (weight_.rowwise() - mean_row);
}

Prop2Report verify_prop2(const ImplicitClassifier& clf, const Eigen::VectorXd& x, int y0, double gamma_t,
                         double tolerance, double fd_step) {
  const int C = clf.num_classes();
  if (y0 < 0 || y0 >= C) throw ArgumentError("verify_prop2: y0 out of range");
  if (!(gamma_t >= 0.0 && gamma_t <= 1.0)) throw ArgumentError("verify_prop2: gamma_t must lie in [0, 1]");

  const Eigen::MatrixXd qbar = cumulative_from_gamma(Eigen::VectorXd::Constant(C, gamma_t));

  // f extended with a zero MASK entry.
  auto extended = [&](const Eigen::VectorXd& point) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(C + 1);
    f.head(C) = clf.probabilities(point);
    return f;
  };
  const Eigen::VectorXd f = extended(x);
  // Eigen's exp clamps large negative arguments, so underflow shows up as a
  // subnormal probability rather than an exact zero.
  if (!(f(y0) >= std::numeric_limits<double>::min())) throw DegenerateError("verify_prop2: f_{y0}(x) underflows");

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(C + 1, clf.dim());
  jac.topRows(C) = clf.jacobian(x);

  const Eigen::VectorXd q_yt_given_x = qbar * f;

  Prop2Report report;
  report.tolerance = tolerance;
  report.lhs = Eigen::VectorXd::Zero(clf.dim());
  report.lhs_fd = Eigen::VectorXd::Zero(clf.dim());
  for (int yt = 0; yt <= C; ++yt) {
    const double weight = qbar(yt, y0);  // q(y_t | y_0)
    if (weight == 0.0) continue;
    const double q = q_yt_given_x(yt);
    if (!(q > 0.0)) throw DegenerateError("verify_prop2: q(y_t | x) vanishes on a reachable state");
    const Eigen::VectorXd grad = jac.transpose() * qbar.row(yt).transpose() / q;
    report.lhs += weight * grad;

    Eigen::VectorXd grad_fd(clf.dim());
    for (int d = 0; d < clf.dim(); ++d) {
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp(d) += fd_step;
      xm(d) -= fd_step;
      const double lp = std::log(qbar.row(yt).dot(extended(xp)));
      const double lm = std::log(qbar.row(yt).dot(extended(xm)));
      grad_fd(d) = (lp - lm) / (2.0 * fd_step);
    }
    report.lhs_fd += weight * grad_fd;
  }
  report.rhs = (1.0 - gamma_t) * jac.row(y0).transpose() / f(y0);
  report.identity_error = (report.lhs - report.rhs).cwiseAbs().maxCoeff();
  report.fd_error = (report.lhs - report.lhs_fd).cwiseAbs().maxCoeff();
  report.passed = report.identity_error <= tolerance && report.fd_error <= 1e-6;
  return report;
}

}  // namespace scdm
