#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fedsysid/rng.hpp"

using fedsysid::Rng;
using fedsysid::Stream;

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, ForkDoesNotAdvanceParent) {
  Rng a(7), b(7);
  (void)a.fork(3);
  (void)a.fork(Stream::kData);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, ForksAreDistinct) {
  const Rng root(123);
  std::set<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 10000; ++k) seeds.insert(root.fork(k).seed());
  EXPECT_EQ(seeds.size(), 10000u);
  EXPECT_NE(root.fork(Stream::kData).seed(), root.fork(Stream::kEnsemble).seed());
  EXPECT_NE(root.fork(Stream::kTrial).seed(), root.fork(Stream::kParticipation).seed());
}

TEST(Rng, DeriveSeedIsDeterministic) {
  static_assert(fedsysid::derive_seed(1, 2) == fedsysid::derive_seed(1, 2));
  EXPECT_NE(fedsysid::derive_seed(1, 2), fedsysid::derive_seed(2, 1));
}

TEST(Rng, UniformRanges) {
  Rng r(5);
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = r.uniform_open();
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int count = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int k = 0; k < count; ++k) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  const double mean = s / count;
  const double var = s2 / count - mean * mean;
  EXPECT_LT(std::abs(mean), 5.0 / std::sqrt(count));
  EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / count));
  EXPECT_NEAR(s4 / count, 3.0, 5.0 * std::sqrt(96.0 / count));
}

TEST(Rng, BelowIsUniform) {
  Rng r(99);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int k = 0; k < draws; ++k) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, draws / 7.0, 5.0 * std::sqrt(draws / 7.0));
}
