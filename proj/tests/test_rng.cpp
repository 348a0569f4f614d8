#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "byzef/rng.hpp"

using namespace byzef;

TEST(Rng, SameSeedSameSequence) {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DeriveSeparatesWorkersAndRounds) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t w = 0; w < 10; ++w) {
    for (std::uint64_t r = 0; r < 10; ++r) firsts.insert(RngStream::derive(7, w, r).next_u64());
  }
  EXPECT_EQ(firsts.size(), 100u);
  EXPECT_EQ(RngStream::derive(7, 3, 4).next_u64(), RngStream::derive(7, 3, 4).next_u64());
}

TEST(Rng, UniformBelowInRangeAndRoughlyUniform) {
  RngStream r(1);
  std::vector<int> counts(5, 0);
  const int draws = 50000;
  for (int i = 0; i < draws; ++i) {
    const auto v = r.uniform_below(5);
    ASSERT_LT(v, 5u);
    ++counts[v];
  }
  const double p = 0.2;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - draws * p), 4 * sd);
  EXPECT_EQ(r.uniform_below(1), 0u);
}

TEST(Rng, Uniform01AndNormalMoments) {
  RngStream r(3);
  const int n = 100000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 4 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 4 * std::sqrt(2.0 / n));
}
