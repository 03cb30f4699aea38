// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "scdm/rng.hpp"
#include "test_support.hpp"

using namespace scdm;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are pure functions of seed, purpose and indices") {
  CounterStream a(7, "label.step", {1, 2, 3});
  CounterStream b(7, "label.step", {1, 2, 3});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

  CHECK(stream_id("label.step", {1, 2}) != stream_id("label.step", {2, 1}));
  CHECK(stream_id("label.step", {1}) != stream_id("label.marginal", {1}));
  CHECK(stream_id("x", {}) != stream_id("x", {0}));

  CounterStream c(8, "label.step", {1, 2, 3});
  CounterStream d(7, "label.step", {1, 2, 3});
  int same = 0;
  for (int i = 0; i < 64; ++i) same += c.next_u32() == d.next_u32();
  CHECK(same < 4);
}

TEST_CASE("distinct index tuples give distinct stream ids") {
  std::set<std::uint64_t> ids;
  for (std::uint64_t i = 0; i < 64; ++i) {
    for (std::uint64_t j = 0; j < 64; ++j) ids.insert(stream_id("sample.noise", {i, j}));
  }
  CHECK(ids.size() == 64u * 64u);
}

TEST_CASE("uniform and normal draws have the right moments") {
  CounterStream rng(11, "test.moments");
  const int n = 200000;
  double s = 0.0;
  double lo = 1.0;
  double hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    s += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  // mean of U(0,1): sd of the estimate is sqrt(1/12/n)
  CHECK(std::abs(s / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));

  double m1 = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("below is bounded and roughly uniform") {
  CounterStream rng(3, "test.below");
  std::array<int, 5> counts{};
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(5);
    REQUIRE(v < 5);
    ++counts[v];
  }
  for (int c : counts) CHECK(testing::within_binomial(c, n, 0.2));
}

TEST_CASE("counter blocks advance by one per four words") {
  CounterStream rng(0, std::uint64_t{0});
  const auto expected = philox4x32_10({0, 0, 0, 0}, {0, 0});
  for (int i = 0; i < 4; ++i) CHECK(rng.next_u32() == expected[static_cast<std::size_t>(i)]);
  CHECK(rng.blocks_consumed() == 1);
  const auto second = philox4x32_10({1, 0, 0, 0}, {0, 0});
  CHECK(rng.next_u32() == second[0]);
}
