// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "scdm/errors.hpp"
#include "scdm/metrics.hpp"
#include "test_support.hpp"

using namespace scdm;
using scdm::testing::random_image;
using scdm::testing::random_map;

namespace {

SemanticMap map_of(int h, int w, int C, std::initializer_list<int> cells) {
  SemanticMap m(h, w, C);
  Eigen::Index k = 0;
  for (int v : cells) m.set_flat(k++, static_cast<ClassId>(v));
  return m;
}

ToyImage constant_image(int h, int w, double v) { return ToyImage(h, w, 1, v); }

Eigen::MatrixXd gaussian_rows(int n, const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol, CounterStream& rng) {
  Eigen::MatrixXd out(n, mean.size());
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index d = 0; d < z.size(); ++d) z(d) = rng.normal();
    out.row(i) = (mean + chol * z).transpose();
  }
  return out;
}

}  // namespace

TEST_CASE("tercile groups by product") {
  const std::vector<double> products{5.0, 1.0, 9.0, 3.0, 7.0, 2.0};
  const auto g = assign_groups(products);
  // Ascending order: 1(1) 5(2) 3(3) 0(5) 4(7) 2(9).
  CHECK(g.group[1] == ClassGroup::frequent);
  CHECK(g.group[5] == ClassGroup::frequent);
  CHECK(g.group[3] == ClassGroup::common);
  CHECK(g.group[0] == ClassGroup::common);
  CHECK(g.group[4] == ClassGroup::rare);
  CHECK(g.group[2] == ClassGroup::rare);
  CHECK(to_string(ClassGroup::rare) == "rare");
}

TEST_CASE("grouped mIoU on the hand example") {
  const auto pred = map_of(2, 2, 2, {0, 0, 1, 1});
  const auto truth = map_of(2, 2, 2, {0, 1, 1, 1});
  GroupAssignment g{{ClassGroup::common, ClassGroup::common}};
  const auto r = grouped_miou(pred, truth, g);
  REQUIRE(r.common);
  CHECK(*r.common == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(*r.all == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK_FALSE(r.frequent);
  CHECK_FALSE(r.rare);
}

TEST_CASE("grouped mIoU of identical maps") {
  CounterStream rng(1, "test.metrics");
  const auto y = random_map(9, 9, 3, rng);
  GroupAssignment g{{ClassGroup::frequent, ClassGroup::common, ClassGroup::rare}};
  const auto r = grouped_miou(y, y, g);
  CHECK(*r.all == 1.0);
  CHECK(*r.frequent == 1.0);
  CHECK(*r.common == 1.0);
  CHECK(*r.rare == 1.0);
}

TEST_CASE("grouped mIoU lies within per-class extremes") {
  CounterStream rng(2, "test.metrics");
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_map(10, 10, 5, rng);
    const auto b = random_map(10, 10, 5, rng);
    const std::vector<double> products{1, 2, 3, 4, 5};
    const auto r = grouped_miou(a, b, assign_groups(products));
    const auto ious = class_iou(a, b);
    double lo = 1.0, hi = 0.0;
    for (const auto& v : ious) {
      if (!v) continue;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
    CHECK(*r.all >= lo - 1e-15);
    CHECK(*r.all <= hi + 1e-15);
    for (const auto& v : {r.frequent, r.common, r.rare}) {
      if (v) {
        CHECK(*v >= 0.0);
        CHECK(*v <= 1.0);
      }
    }
  }
}

TEST_CASE("PSNR hand values") {
  const auto a = constant_image(4, 4, 0.0);
  CHECK(std::isinf(psnr(a, a, 1.0)));
  CHECK(psnr(a, constant_image(4, 4, 1.0), 1.0) == doctest::Approx(0.0));
  CHECK(psnr(a, constant_image(4, 4, 0.5), 1.0) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
  CHECK(psnr(a, constant_image(4, 4, 0.5), 1.0) == doctest::Approx(6.0206).epsilon(1e-5));
  CHECK_THROWS_AS(psnr(a, constant_image(4, 5, 0.0), 1.0), ArgumentError);
  CHECK_THROWS_AS(psnr(a, a, 0.0), ArgumentError);
}

TEST_CASE("PSNR decreases with noise amplitude") {
  CounterStream rng(3, "test.metrics");
  const auto clean = random_image(16, 16, 1, rng, 0.3);
  const auto noise = random_image(16, 16, 1, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.1, 0.5}) {
    ToyImage noisy = clean;
    noisy.values() += amp * noise.values();
    const double p = psnr(clean, noisy, 2.0);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("SSIM single window matches the formula") {
  CounterStream rng(4, "test.metrics");
  const auto a = random_image(4, 4, 1, rng, 0.5);
  const auto b = random_image(4, 4, 1, rng, 0.5);
  SsimOptions opt;
  opt.window = 4;
  const double n = 16.0;
  const double ma = a.values().mean(), mb = b.values().mean();
  double va = 0, vb = 0, cab = 0;
  for (Eigen::Index k = 0; k < 16; ++k) {
    const double da = a.values()(k, 0) - ma, db = b.values()(k, 0) - mb;
    va += da * da;
    vb += db * db;
    cab += da * db;
  }
  va /= n - 1;
  vb /= n - 1;
  cab /= n - 1;
  const double c1 = std::pow(0.01 * 2.0, 2), c2 = std::pow(0.03 * 2.0, 2);
  const double want = (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  CHECK(std::abs(ssim(a, b, opt) - want) < 1e-10);
}

TEST_CASE("SSIM identity, symmetry and errors") {
  CounterStream rng(5, "test.metrics");
  const auto a = random_image(12, 10, 2, rng, 0.5);
  const auto b = random_image(12, 10, 2, rng, 0.5);
  for (auto kind : {SsimWindow::uniform, SsimWindow::gaussian}) {
    SsimOptions opt;
    opt.kind = kind;
    CHECK(ssim(a, a, opt) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b, opt) == doctest::Approx(ssim(b, a, opt)).epsilon(1e-14));
    const double s = ssim(a, b, opt);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
  SsimOptions big;
  big.window = 11;
  CHECK_THROWS_AS(ssim(a, b, big), ArgumentError);
}

TEST_CASE("Frechet distance from moments") {
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0.0;
  m1 << 1.0;
  Eigen::MatrixXd c1(1, 1), c4(1, 1);
  c1 << 1.0;
  c4 << 4.0;
  CHECK(frechet_from_moments(m0, c1, m1, c4) == doctest::Approx(2.0).epsilon(1e-12));

  CounterStream rng(6, "test.metrics");
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 4);
  const Eigen::MatrixXd cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd mu(4), d(4);
  mu << 0.1, -0.2, 0.3, 0.0;
  d << 1.0, 2.0, -0.5, 0.25;
  CHECK(frechet_from_moments(mu, cov, mu + d, cov) == doctest::Approx(d.squaredNorm()).epsilon(1e-9));
  CHECK(std::abs(frechet_from_moments(mu, cov, mu, cov)) < 1e-8);

  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(frechet_from_moments(Eigen::VectorXd::Zero(2), bad, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                  NumericError);
}

TEST_CASE("Frechet distance between sample sets") {
  CounterStream rng(7, "test.metrics");
  Eigen::MatrixXd chol(3, 3);
  chol << 1.0, 0.0, 0.0, 0.3, 0.8, 0.0, -0.2, 0.1, 0.5;
  const auto A = gaussian_rows(200, Eigen::Vector3d(0.0, 0.5, -0.5), chol, rng);
  const auto B = gaussian_rows(150, Eigen::Vector3d(0.3, 0.2, -0.1), 0.7 * chol, rng);
  CHECK(std::abs(frechet_gaussian(A, A)) < 1e-8);
  const double ab = frechet_gaussian(A, B);
  CHECK(ab > 0.0);
  CHECK(frechet_gaussian(B, A) == doctest::Approx(ab).epsilon(1e-9));

  // Common rotation of both sets.
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(3, 3)).householderQ();
  CHECK(std::abs(frechet_gaussian(A * q, B * q) - ab) < 1e-6);

  // Fewer samples than dimensions still yields a finite value.
  const auto tiny_a = gaussian_rows(2, Eigen::Vector3d::Zero(), chol, rng);
  const auto tiny_b = gaussian_rows(3, Eigen::Vector3d::Zero(), chol, rng);
  CHECK(std::isfinite(frechet_gaussian(tiny_a, tiny_b)));
}
