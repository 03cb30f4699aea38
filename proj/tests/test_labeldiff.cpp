// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "scdm/errors.hpp"
#include "scdm/labeldiff.hpp"
#include "test_support.hpp"

using namespace scdm;
using scdm::testing::random_map;
using scdm::testing::TempDir;
using scdm::testing::within_binomial;

namespace {

LabelSchedule two_class_schedule(int T) {
  const std::vector<double> products{3.0, 17.3};
  return build_label_schedule(products, T, Eta::finite(1.0));
}

SemanticMap constant_map(int h, int w, int C, ClassId v) {
  return SemanticMap(h, w, C, v);
}

}  // namespace

TEST_CASE("a step with zero beta changes nothing") {
  CounterStream rng(1, "test.labeldiff");
  const auto y = random_map(8, 8, 3, rng, true);
  const auto s = build_label_schedule(std::vector<double>{2.0, 5.0, 9.0}, 6, Eta::infinite());
  for (int t = 1; t <= 6; ++t) CHECK(diffuse_step(y, s, t, {3, 0}) == y);
}

TEST_CASE("MASK is absorbing under steps") {
  const auto s = uniform_label_schedule(2, 10);
  SemanticMap y = constant_map(16, 16, 2, 1);
  std::vector<bool> masked(static_cast<std::size_t>(y.size()), false);
  for (int t = 1; t <= 10; ++t) {
    y = diffuse_step(y, s, t, {5, 1});
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      if (masked[static_cast<std::size_t>(k)]) CHECK(y[k] == y.mask());
      masked[static_cast<std::size_t>(k)] = y[k] == y.mask();
    }
  }
}

TEST_CASE("step masking rate") {
  const auto s = uniform_label_schedule(1, 4);  // beta_3 = 1/3
  const SemanticMap y = constant_map(64, 64, 1, 0);
  const auto out = diffuse_step(y, s, 3, {11, 0});
  CHECK(within_binomial(static_cast<double>(out.count_masked()), static_cast<double>(y.size()), 1.0 / 3.0));
}

TEST_CASE("marginal draw at t=1 is the identity") {
  CounterStream rng(2, "test.labeldiff");
  const auto y = random_map(10, 7, 2, rng);
  CHECK(diffuse_to(y, two_class_schedule(8), 1, {1, 2}) == y);
}

TEST_CASE("uniform marginal rate at half way") {
  const auto s = uniform_label_schedule(1, 10);  // gamma_6 = 0.5
  const SemanticMap y = constant_map(64, 64, 1, 0);
  const auto out = diffuse_to(y, s, 6, {12, 0});
  CHECK(within_binomial(static_cast<double>(out.count_masked()), static_cast<double>(y.size()), 0.5));
}

TEST_CASE("diffuse_to rejects MASK input and bad steps") {
  SemanticMap y = constant_map(2, 2, 2, 0);
  y.set(0, 0, y.mask());
  CHECK_THROWS_AS(diffuse_to(y, two_class_schedule(4), 2, {}), ArgumentError);
  CHECK_THROWS_AS(diffuse_step(constant_map(2, 2, 2, 0), two_class_schedule(4), 5, {}), ArgumentError);
  CHECK_THROWS_AS(diffuse_step(constant_map(2, 2, 3, 0), two_class_schedule(4), 2, {}), ArgumentError);
}

TEST_CASE("sequential chain matches the one-shot marginal law") {
  // Pool per-class mask counts over many maps and compare against gamma with a
  // chi-square test on the (class, masked) table.
  const int T = 8;
  const auto s = two_class_schedule(T);
  CounterStream rng(3, "test.labeldiff");
  const auto y0 = random_map(4, 4, 2, rng);
  const int trials = 4000;
  for (int t : {3, 8}) {
    std::array<double, 2> masked_seq{0, 0};
    std::array<double, 2> total{0, 0};
    for (int i = 0; i < trials; ++i) {
      SemanticMap y = y0;
      for (int step = 1; step <= t; ++step) y = diffuse_step(y, s, step, {77, static_cast<std::uint64_t>(i)});
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        total[y0[k]] += 1;
        if (y[k] == y.mask()) masked_seq[y0[k]] += 1;
      }
    }
    double chi2 = 0.0;
    for (int c = 0; c < 2; ++c) {
      const double p = s.gamma(t, c);
      const double e1 = total[static_cast<std::size_t>(c)] * p;
      const double e0 = total[static_cast<std::size_t>(c)] - e1;
      const double o1 = masked_seq[static_cast<std::size_t>(c)];
      chi2 += (o1 - e1) * (o1 - e1) / e1 + (o1 - e1) * (o1 - e1) / e0;
    }
    const boost::math::chi_squared dist(2.0);
    CHECK(chi2 < boost::math::quantile(dist, 0.9999));
  }
}

TEST_CASE("mask time inverse CDF") {
  const auto s = uniform_label_schedule(1, 4);  // gamma = 0, .25, .5, .75
  CHECK(mask_time_for(0.0, s, 0) == 2);
  CHECK(mask_time_for(0.2, s, 0) == 2);
  CHECK(mask_time_for(0.25, s, 0) == 3);
  CHECK(mask_time_for(0.74, s, 0) == 4);
  CHECK(mask_time_for(0.75, s, 0) == 5);
  CHECK(mask_time_for(0.999, s, 0) == 5);
  const auto none = build_label_schedule(std::vector<double>{5.0}, 4, Eta::infinite());
  CHECK(mask_time_for(0.0, none, 0) == 5);
}

TEST_CASE("mask time CDF matches gamma") {
  const int T = 16;
  const auto s = build_label_schedule(std::vector<double>{17.3}, T, Eta::finite(1.0));
  const SemanticMap y0 = constant_map(128, 128, 1, 0);
  const auto times = sample_mask_times(y0, s, {21, 0});
  const double n = static_cast<double>(y0.size());
  for (int t = 1; t <= T; ++t) {
    const double hits = static_cast<double>((times.mask_time <= t).count());
    if (s.gamma(t, 0) == 0.0) {
      CHECK(hits == 0.0);
    } else {
      CHECK(within_binomial(hits, n, s.gamma(t, 0)));
    }
  }
  CHECK(((times.mask_time >= 1) && (times.mask_time <= T + 1)).all());
}

TEST_CASE("reconstruction is nested and endpoints are right") {
  CounterStream rng(4, "test.labeldiff");
  const auto y0 = random_map(12, 12, 2, rng);
  const auto s = two_class_schedule(10);
  const auto times = sample_mask_times(y0, s, {9, 3});
  CHECK(reconstruct(times, y0, 0) == y0);
  CHECK(reconstruct(times, y0, 1) == y0);
  SemanticMap prev = y0;
  for (int t = 1; t <= 10; ++t) {
    const auto cur = reconstruct(times, y0, t);
    for (Eigen::Index k = 0; k < y0.size(); ++k) {
      if (prev[k] == prev.mask()) CHECK(cur[k] == cur.mask());
      if (cur[k] != cur.mask()) CHECK(cur[k] == y0[k]);
    }
    prev = cur;
  }
  CHECK_THROWS_AS(reconstruct(times, y0, 11), ArgumentError);
}

TEST_CASE("mask time dump round trip") {
  TempDir dir;
  CounterStream rng(5, "test.labeldiff");
  const auto y0 = random_map(9, 5, 2, rng);
  const auto times = sample_mask_times(y0, two_class_schedule(7), {2, 2});
  save_mask_times(times, dir / "mt.slm", dir / "mt.json");
  const auto back = load_mask_times(dir / "mt.slm");
  CHECK(back.steps == 7);
  CHECK((back.mask_time == times.mask_time).all());
  CHECK(std::filesystem::exists(dir / "mt.json"));
}

TEST_CASE("coupled sampler is deterministic per key and varies across keys") {
  CounterStream rng(6, "test.labeldiff");
  const auto y0 = random_map(16, 16, 2, rng);
  const auto s = two_class_schedule(20);
  const auto a = sample_mask_times(y0, s, {1, 0});
  const auto b = sample_mask_times(y0, s, {1, 0});
  const auto c = sample_mask_times(y0, s, {1, 1});
  CHECK((a.mask_time == b.mask_time).all());
  CHECK_FALSE((a.mask_time == c.mask_time).all());
}

TEST_CASE("pixels mask independently") {
  // Sample covariance of two neighbours' mask indicators should be near zero.
  const auto s = uniform_label_schedule(1, 10);
  const SemanticMap y0 = constant_map(1, 2, 1, 0);
  const int n = 20000;
  double sa = 0, sb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const auto times = sample_mask_times(y0, s, {31, static_cast<std::uint64_t>(i)});
    const double a = times.mask_time(0, 0) <= 6 ? 1.0 : 0.0;
    const double b = times.mask_time(0, 1) <= 6 ? 1.0 : 0.0;
    sa += a;
    sb += b;
    sab += a * b;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  // Under independence the estimator's sd is about p(1-p)/sqrt(n), p = 0.5.
  CHECK(std::abs(cov) < 4.0 * 0.25 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("coupled and fresh marginals agree") {
  const int T = 6;
  const auto s = two_class_schedule(T);
  SemanticMap y0(1, 2, 2);
  y0.set(0, 1, 1);
  const int n = 20000;
  std::map<std::pair<int, int>, double> coupled, fresh;
  for (int i = 0; i < n; ++i) {
    const RngKey key{41, static_cast<std::uint64_t>(i)};
    const auto times = sample_mask_times(y0, s, key);
    for (int t = 1; t <= T; ++t) {
      const auto yc = reconstruct(times, y0, t);
      const auto yf = diffuse_to(y0, s, t, key);
      for (int k = 0; k < 2; ++k) {
        coupled[{t, k}] += yc[k] == yc.mask() ? 1.0 : 0.0;
        fresh[{t, k}] += yf[k] == yf.mask() ? 1.0 : 0.0;
      }
    }
  }
  for (int t = 1; t <= T; ++t) {
    for (int k = 0; k < 2; ++k) {
      const double p = s.gamma(t, y0[k]);
      if (p == 0.0) {
        CHECK(coupled[{t, k}] == 0.0);
        CHECK(fresh[{t, k}] == 0.0);
      } else {
        CHECK(within_binomial(coupled[{t, k}], n, p));
        CHECK(within_binomial(fresh[{t, k}], n, p));
      }
    }
  }
}

TEST_CASE("expected classifier gradient identity") {
  CounterStream rng(7, "test.labeldiff");
  for (double g : {0.0, 0.1, 0.5, 0.9}) {
    for (int trial = 0; trial < 25; ++trial) {
      Eigen::MatrixXd w(3, 2);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.normal();
      Eigen::VectorXd x(2);
      x << rng.normal(), rng.normal();
      const int y0 = static_cast<int>(rng.below(3));
      const auto r = verify_prop2(ImplicitClassifier(w), x, y0, g, 1e-10);
      CHECK(r.identity_error < 1e-10);
      CHECK(r.fd_error < 1e-6);
      CHECK(r.passed);
    }
  }
}

TEST_CASE("fully masked gamma gives a zero gradient") {
  Eigen::MatrixXd w(3, 2);
  w << 1, 2, -1, 0.5, 0.3, -2;
  Eigen::VectorXd x(2);
  x << 0.4, -0.7;
  const auto r = verify_prop2(ImplicitClassifier(w), x, 1, 1.0, 1e-12);
  CHECK(r.lhs.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.rhs.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("classifier Jacobian matches finite differences") {
  Eigen::MatrixXd w(4, 3);
  w << 1, 2, -1, 0.5, 0.3, -2, 0, 1, 1, -1, -1, 0.2;
  const ImplicitClassifier clf(w);
  Eigen::VectorXd x(3);
  x << 0.1, -0.4, 0.9;
  const Eigen::MatrixXd jac = clf.jacobian(x);
  for (int d = 0; d < 3; ++d) {
    Eigen::VectorXd xp = x, xm = x;
    xp(d) += 1e-6;
    xm(d) -= 1e-6;
    const Eigen::VectorXd fd = (clf.probabilities(xp) - clf.probabilities(xm)) / 2e-6;
    CHECK((fd - jac.col(d)).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(clf.probabilities(x).sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("degenerate classifier is reported") {
  Eigen::MatrixXd w(2, 1);
  w << 1000, -1000;
  Eigen::VectorXd x(1);
  x << 1.0;
  CHECK_THROWS_AS(verify_prop2(ImplicitClassifier(w), x, 1, 0.5, 1e-10), DegenerateError);
  CHECK_THROWS_AS(verify_prop2(ImplicitClassifier(w), x, 2, 0.5, 1e-10), ArgumentError);
}
