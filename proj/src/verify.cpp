// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "scdm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "scdm/denoiser.hpp"
#include "scdm/errors.hpp"
#include "scdm/io_util.hpp"
#include "scdm/labeldiff.hpp"
#include "scdm/mlp.hpp"
#include "scdm/rng.hpp"
#include "scdm/schedule.hpp"
#include "scdm/train.hpp"

namespace scdm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

CheckResult result(std::string target, std::string name, double measured, double tolerance, Clock::time_point start,
                   bool inclusive = false) {
  CheckResult r;
  r.target = std::move(target);
  r.name = std::move(name);
  r.measured = measured;
  r.tolerance = tolerance;
  r.passed = std::isfinite(measured) && (inclusive ? measured <= tolerance : measured < tolerance);
  r.seconds = seconds_since(start);
  return r;
}

// Per-cell law of the first masking step: index t-1 for t in 1..T, T for never.
Eigen::VectorXd mask_time_pmf(const LabelSchedule& schedule, int c) {
  const int T = schedule.steps();
  Eigen::VectorXd pmf(T + 1);
  for (int t = 1; t <= T; ++t) pmf(t - 1) = schedule.gamma(t, c) - schedule.gamma(t - 1, c);
  pmf(T) = 1.0 - schedule.gamma(T, c);
  return pmf;
}

}  // namespace

const std::vector<std::string>& verify_targets() {
  static const std::vector<std::string> names = {"prop1", "prop2", "marginal", "trajectory", "oracle", "gradcheck"};
  return names;
}

std::vector<CheckResult> check_prop1(const VerifyConfig& config) {
  const auto start = Clock::now();
  const Prop1Report r = verify_prop1(config.product, config.T, config.prop1_tolerance);
  return {result("prop1", "max |gamma(eta=1e-8) - (t-1)/T|", r.max_small_eta_error, r.tolerance, start),
          result("prop1", "max gamma(eta=1e4)", r.max_large_eta_gamma, r.tolerance, start)};
}

std::vector<CheckResult> check_prop2(const VerifyConfig& config) {
  const auto start = Clock::now();
  CounterStream rng(config.seed, "verify.prop2");
  double identity = 0.0;
  double fd = 0.0;
  for (int k = 0; k < config.prop2_classifiers; ++k) {
    Eigen::MatrixXd w(3, 2);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    const ImplicitClassifier clf(w);
    Eigen::VectorXd x(2);
    x << rng.normal(), rng.normal();
    const int y0 = static_cast<int>(rng.below(3));
    for (double g : {0.1, 0.5, 0.9}) {
      const Prop2Report r = verify_prop2(clf, x, y0, g, config.prop2_tolerance);
      identity = std::max(identity, r.identity_error);
      fd = std::max(fd, r.fd_error);
    }
  }
  return {result("prop2", "max |LHS - RHS| (analytic)", identity, config.prop2_tolerance, start),
          result("prop2", "max |analytic - finite difference|", fd, 1e-6, start)};
}

std::vector<CheckResult> check_marginal(const VerifyConfig& config) {
  const auto start = Clock::now();
  CounterStream rng(config.seed, "verify.marginal");
  double worst = 0.0;
  for (int k = 0; k < config.marginal_schedules; ++k) {
    const int T = 1 + static_cast<int>(rng.below(16));
    const int C = 1 + static_cast<int>(rng.below(5));
    std::vector<double> products(static_cast<std::size_t>(C));
    std::set<int> uniform;
    for (int c = 0; c < C; ++c) {
      products[static_cast<std::size_t>(c)] = std::exp(0.1 + 7.0 * rng.uniform());
      if (rng.uniform() < 0.2) uniform.insert(c);
    }
    const Eta eta = Eta::finite(0.05 + 3.0 * rng.uniform());
    const LabelSchedule sched = build_label_schedule(products, T, eta, uniform);
    for (int t = 1; t <= T; ++t) {
      const double err = (cumulative_marginal(sched, t) - marginal_by_product(sched, t)).cwiseAbs().maxCoeff();
      worst = std::max(worst, err);
    }
  }
  return {result("marginal", "max |closed form - Q product|", worst, 1e-12, start)};
}

std::vector<CheckResult> check_trajectory(const VerifyConfig& config) {
  const auto start = Clock::now();
  constexpr int kT = 4;
  LabelGrid cells(2, 2);
  cells << 0, 1, 1, 0;
  const SemanticMap y0(cells, 2);
  const std::vector<double> products = {3.0, 17.3};
  const LabelSchedule sched = build_label_schedule(products, kT, Eta::finite(1.0));

  // Exact trajectory law: cells are independent, each with its own
  // mask-time pmf. Outcome code is base-(T+1) over cells.
  const int per_cell = kT + 1;
  const int outcomes = per_cell * per_cell * per_cell * per_cell;
  std::vector<Eigen::VectorXd> pmf;
  for (Eigen::Index k = 0; k < y0.size(); ++k) pmf.push_back(mask_time_pmf(sched, y0[k]));
  Eigen::VectorXd exact = Eigen::VectorXd::Zero(outcomes);
  for (int code = 0; code < outcomes; ++code) {
    double p = 1.0;
    int rest = code;
    for (std::size_t k = 0; k < 4; ++k) {
      p *= pmf[k](rest % per_cell);
      rest /= per_cell;
    }
    exact(code) = p;
  }

  auto encode = [&](const std::array<int, 4>& first) {
    int code = 0;
    for (int k = 3; k >= 0; --k) code = code * per_cell + (first[static_cast<std::size_t>(k)] - 1);
    return code;
  };

  const int n = config.trajectory_trials;
  Eigen::VectorXd coupled = Eigen::VectorXd::Zero(outcomes);
  Eigen::VectorXd chain = Eigen::VectorXd::Zero(outcomes);
  const std::uint64_t chain_seed = splitmix64(config.seed ^ 0x5EEDull);
  for (int trial = 0; trial < n; ++trial) {
    const auto idx = static_cast<std::uint64_t>(trial);
    const MaskTimeMatrix u = sample_mask_times(y0, sched, {config.seed, idx});
    std::array<int, 4> first{};
    for (std::size_t k = 0; k < 4; ++k) first[k] = u.mask_time.data()[k];
    coupled(encode(first)) += 1.0;

    first.fill(kT + 1);
    SemanticMap y = y0;
    for (int t = 1; t <= kT; ++t) {
      y = diffuse_step(y, sched, t, {chain_seed, idx});
      for (std::size_t k = 0; k < 4; ++k) {
        if (first[k] == kT + 1 && y.is_masked(static_cast<Eigen::Index>(k))) first[k] = t;
      }
    }
    chain(encode(first)) += 1.0;
  }
  coupled /= n;
  chain /= n;
  const double tv_coupled = 0.5 * (coupled - exact).cwiseAbs().sum();
  const double tv_chain = 0.5 * (chain - exact).cwiseAbs().sum();

  // Single-time marginals of the coupled construction and of direct sampling.
  const int m = config.marginal_trials;
  Eigen::MatrixXd hits_u = Eigen::MatrixXd::Zero(kT, 4);
  Eigen::MatrixXd hits_fresh = Eigen::MatrixXd::Zero(kT, 4);
  const std::uint64_t marg_seed = splitmix64(config.seed ^ 0xC0FFEEull);
  for (int trial = 0; trial < m; ++trial) {
    const RngKey key{marg_seed, static_cast<std::uint64_t>(trial)};
    const MaskTimeMatrix u = sample_mask_times(y0, sched, key);
    for (int t = 1; t <= kT; ++t) {
      const SemanticMap fresh = diffuse_to(y0, sched, t, key);
      for (Eigen::Index k = 0; k < 4; ++k) {
        if (u.mask_time.data()[k] <= t) hits_u(t - 1, k) += 1.0;
        if (fresh.is_masked(k)) hits_fresh(t - 1, k) += 1.0;
      }
    }
  }
  auto max_z = [&](const Eigen::MatrixXd& hits) {
    double z = 0.0;
    for (int t = 1; t <= kT; ++t) {
      for (Eigen::Index k = 0; k < 4; ++k) {
        const double g = sched.gamma(t, y0[k]);
        const double p = hits(t - 1, k) / m;
        if (g <= 0.0 || g >= 1.0) {
          if (p != g) return std::numeric_limits<double>::infinity();
          continue;
        }
        z = std::max(z, std::abs(p - g) / std::sqrt(g * (1.0 - g) / m));
      }
    }
    return z;
  };
  return {result("trajectory", "TV(mask-time reconstruction, exact law)", tv_coupled, 0.01, start),
          result("trajectory", "TV(sequential chain, exact law)", tv_chain, 0.01, start),
          result("trajectory", "max z-score of coupled marginals vs gamma", max_z(hits_u), 4.0, start, true),
          result("trajectory", "max z-score of fresh marginals vs gamma", max_z(hits_fresh), 4.0, start, true)};
}

namespace {

// Composite Simpson rule on [a, b] with n (even) intervals.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

std::vector<CheckResult> check_oracle(const VerifyConfig& config) {
  const auto start = Clock::now();
  ToyDataSpec spec;
  spec.class_means.resize(2, 1);
  spec.class_means << -0.6, 0.5;
  spec.sigma0 = 0.3;
  spec.class_prior = Eigen::Vector2d(0.5, 0.5);

  CounterStream rng(config.seed, "verify.oracle");
  double worst_mean = 0.0;
  double worst_eps = 0.0;
  for (int probe = 0; probe < config.oracle_probes; ++probe) {
    const double ab = probe == 0 ? 0.5 : 0.05 + 0.9 * rng.uniform();
    const double xt = -2.0 + 4.0 * rng.uniform();
    const int label = static_cast<int>(rng.below(3));  // 2 is MASK
    const double s2 = spec.sigma0 * spec.sigma0;
    const double noise_var = 1.0 - ab;

    // Joint density of (x0, x_t) for class c, integrated over x0.
    double z = 0.0;
    double m1 = 0.0;
    for (int c = 0; c < 2; ++c) {
      if (label != 2 && label != c) continue;
      const double mc = spec.class_means(c, 0);
      auto joint = [&](double x0) {
        const double a = (x0 - mc) * (x0 - mc) / (2.0 * s2);
        const double b = (xt - std::sqrt(ab) * x0) * (xt - std::sqrt(ab) * x0) / (2.0 * noise_var);
        return std::exp(-a - b) / (2.0 * std::numbers::pi * std::sqrt(s2 * noise_var));
      };
      const double lo = mc - 12.0 * spec.sigma0;
      const double hi = mc + 12.0 * spec.sigma0;
      const double w = label == 2 ? spec.class_prior(c) : 1.0;
      z += w * simpson(joint, lo, hi, 4000);
      m1 += w * simpson([&](double x0) { return x0 * joint(x0); }, lo, hi, 4000);
    }
    const double mean_quad = m1 / z;

    const ImageSchedule sched = ImageSchedule::from_alpha_bar(Eigen::VectorXd::Constant(1, ab));
    const OracleDenoiser oracle(spec, sched);
    const double mean_oracle = oracle.posterior_mean(Eigen::RowVectorXd::Constant(1, xt), label, ab)(0);
    ToyImage x(1, 1, 1, xt);
    SemanticMap y(1, 1, 2, static_cast<ClassId>(label));
    const double eps_oracle = oracle.predict(x, y, 1).epsilon(0, 0, 0);
    const double eps_quad = (xt - std::sqrt(ab) * mean_quad) / std::sqrt(noise_var);
    worst_mean = std::max(worst_mean, std::abs(mean_oracle - mean_quad));
    worst_eps = std::max(worst_eps, std::abs(eps_oracle - eps_quad));
  }
  return {result("oracle", "max |E[x0|x_t,y] - quadrature|", worst_mean, 1e-8, start),
          result("oracle", "max |eps - quadrature|", worst_eps, 1e-6, start)};
}

std::vector<CheckResult> check_gradcheck(const VerifyConfig& config) {
  const auto start = Clock::now();
  MlpConfig mc;
  mc.num_classes = 3;
  mc.channels = 2;
  mc.embed_dim = 3;
  mc.hidden = 6;
  mc.steps = 10;
  mc.learn_variance = true;
  MlpDenoiser model(mc, config.seed);
  const ImageSchedule sched = build_image_schedule(mc.steps);

  CounterStream rng(config.seed, "verify.gradcheck");
  const ToyImage x0 = standard_normal_image(3, 3, 2, rng);
  const ToyImage eps = standard_normal_image(3, 3, 2, rng);
  SemanticMap y(3, 3, 3);
  for (Eigen::Index k = 0; k < y.size(); ++k) y.set_flat(k, static_cast<ClassId>(rng.below(4)));
  const int t = 5;
  const double h = 1e-4;

  auto rel_error = [](const Eigen::VectorXd& a, const Eigen::VectorXd& n) {
    const double scale = std::max({a.norm(), n.norm(), 1e-12});
    return (a - n).norm() / scale;
  };

  // L_simple through the whole network.
  Eigen::VectorXd analytic = Eigen::VectorXd::Zero(model.parameters().size());
  example_loss(model, x0, y, t, eps, sched, 0.0, &analytic);
  Eigen::VectorXd numeric(analytic.size());
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double keep = model.parameters()(i);
    model.parameters()(i) = keep + h;
    const double up = example_loss(model, x0, y, t, eps, sched, 0.0).total;
    model.parameters()(i) = keep - h;
    const double down = example_loss(model, x0, y, t, eps, sched, 0.0).total;
    model.parameters()(i) = keep;
    numeric(i) = (up - down) / (2.0 * h);
  }
  const double simple_err = rel_error(analytic, numeric);

  // Both output heads under a fixed linear probe.
  const ToyImage x_t = noise_with(x0, eps, sched.alpha_bar(t));
  const ToyImage g_eps = standard_normal_image(3, 3, 2, rng);
  const ToyImage g_var = standard_normal_image(3, 3, 2, rng);
  auto probe = [&]() {
    const DenoiserOutput out = model.predict(x_t, y, t);
    return (out.epsilon.values().array() * g_eps.values().array()).sum() +
           (out.variance_logit->values().array() * g_var.values().array()).sum();
  };
  Eigen::VectorXd analytic2 = Eigen::VectorXd::Zero(model.parameters().size());
  model.backward(x_t, y, t, g_eps, &g_var, analytic2);
  Eigen::VectorXd numeric2(analytic2.size());
  for (Eigen::Index i = 0; i < analytic2.size(); ++i) {
    const double keep = model.parameters()(i);
    model.parameters()(i) = keep + h;
    const double up = probe();
    model.parameters()(i) = keep - h;
    const double down = probe();
    model.parameters()(i) = keep;
    numeric2(i) = (up - down) / (2.0 * h);
  }
  const double heads_err = rel_error(analytic2, numeric2);

  // Variance-logit gradient of the hybrid loss at the output layer.
  DenoiserOutput pred = model.predict(x_t, y, t);
  const double lambda = 0.5;
  const HybridLoss base = hybrid_loss(eps, pred, x0, x_t, sched, t, lambda);
  Eigen::VectorXd a3(pred.variance_logit->size());
  Eigen::VectorXd n3(a3.size());
  for (Eigen::Index k = 0; k < a3.size(); ++k) {
    a3(k) = base.grad_variance->values().data()[k];
    double& v = pred.variance_logit->values().data()[k];
    const double keep = v;
    v = keep + h;
    const double up = hybrid_loss(eps, pred, x0, x_t, sched, t, lambda).total;
    v = keep - h;
    const double down = hybrid_loss(eps, pred, x0, x_t, sched, t, lambda).total;
    v = keep;
    n3(k) = (up - down) / (2.0 * h);
  }
  const double var_err = rel_error(a3, n3);

  return {result("gradcheck", "relative error, L_simple parameter gradient", simple_err, 1e-3, start),
          result("gradcheck", "relative error, both heads under a linear probe", heads_err, 1e-3, start),
          result("gradcheck", "relative error, hybrid loss wrt variance logit", var_err, 1e-3, start)};
}

std::vector<CheckResult> run_verify(const std::vector<std::string>& targets, const VerifyConfig& config) {
  if (targets.empty()) throw ArgumentError("verify: no targets selected");
  static const std::map<std::string, std::vector<CheckResult> (*)(const VerifyConfig&)> table = {
      {"prop1", &check_prop1},           {"prop2", &check_prop2},   {"marginal", &check_marginal},
      {"trajectory", &check_trajectory}, {"oracle", &check_oracle}, {"gradcheck", &check_gradcheck}};
  for (const auto& name : targets) {
    if (!table.contains(name)) throw ArgumentError("verify: unknown target '" + name + "'");
  }
  std::vector<CheckResult> all;
  for (const auto& name : targets) {
    auto part = table.at(name)(config);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

nlohmann::ordered_json verify_config_to_json(const VerifyConfig& c) {
  return {{"product", c.product},
          {"T", c.T},
          {"prop1_tolerance", c.prop1_tolerance},
          {"prop2_classifiers", c.prop2_classifiers},
          {"prop2_tolerance", c.prop2_tolerance},
          {"marginal_schedules", c.marginal_schedules},
          {"trajectory_trials", c.trajectory_trials},
          {"marginal_trials", c.marginal_trials},
          {"oracle_probes", c.oracle_probes},
          {"seed", c.seed}};
}

nlohmann::ordered_json verify_report(const std::vector<CheckResult>& results, const VerifyConfig& config) {
  nlohmann::ordered_json j;
  j["schema"] = "scdm.verify.v1";
  j["version"] = std::string(kVersion);
  j["verify"] = verify_config_to_json(config);
  bool all = true;
  auto checks = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    checks.push_back({{"target", r.target},
                      {"name", r.name},
                      {"measured", std::isfinite(r.measured) ? nlohmann::ordered_json(r.measured) : nlohmann::ordered_json(nullptr)},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed},
                      {"seconds", r.seconds}});
  }
  j["checks"] = checks;
  j["passed"] = all;
  return j;
}

}  // namespace scdm
