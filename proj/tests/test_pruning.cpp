#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "phi/pruning.hpp"

namespace phi {
namespace {

ClusterAssignment sizes_of(const std::vector<int>& sizes) {
  ClusterAssignment a;
  int n = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    for (int i = 0; i < sizes[c]; ++i) a.labels.push_back(static_cast<int>(c));
    n += sizes[c];
  }
  a.sizes = sizes;
  a.largest_fraction = static_cast<double>(*std::max_element(sizes.begin(), sizes.end())) / n;
  return a;
}

TEST(InwidthFilter, ThreeCandidateExample) {
  // mean = -2.631 / 3 = -0.877; squared deviations 0.595984, 0.427716,
  // 2.033476 sum to 3.057176, so sigma = sqrt(3.057176 / 3) = 1.00948.
  const std::vector<double> conf{-0.105, -0.223, -2.303};
  const auto rep = inwidth_filter(conf, 1);
  EXPECT_NEAR(rep.mean, -0.877, 1e-12);
  EXPECT_NEAR(rep.stddev, std::sqrt(3.057176 / 3.0), 1e-9);
  EXPECT_NEAR(rep.threshold, -0.877 - std::sqrt(3.057176 / 3.0), 1e-9);
  EXPECT_EQ(rep.kept, (std::vector<int>{0, 1}));
  EXPECT_EQ(rep.dropped, std::vector<int>{2});
}

TEST(InwidthFilter, EqualAndSingle) {
  const auto eq = inwidth_filter(std::vector<double>(5, -0.4), 1);
  EXPECT_EQ(eq.stddev, 0.0);
  EXPECT_EQ(eq.kept.size(), 5u);
  const auto one = inwidth_filter(std::vector<double>{-3.0}, 2);
  EXPECT_EQ(one.kept, std::vector<int>{0});
}

TEST(InwidthFilter, Errors) {
  EXPECT_THROW(inwidth_filter(std::vector<double>{}, 1), DomainError);
  EXPECT_THROW(inwidth_filter(std::vector<double>{-1.0, NAN}, 1), DomainError);
  EXPECT_THROW(inwidth_filter(std::vector<double>{-1.0, -INFINITY}, 1), DomainError);
}

TEST(InwidthFilter, PropertiesOnRandomPools) {
  auto rng = seeded_rng(21, "prune");
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> conf(1 + rng.below(64));
    for (auto& c : conf) c = -rng.uniform() * 5.0;
    std::size_t prev = 0;
    for (int k = 1; k <= 4; ++k) {
      const auto rep = inwidth_filter(conf, k);
      ASSERT_FALSE(rep.kept.empty());
      ASSERT_EQ(rep.kept.size() + rep.dropped.size(), conf.size());
      for (int i : rep.kept) ASSERT_GE(conf[static_cast<std::size_t>(i)], rep.threshold);
      for (int i : rep.dropped) ASSERT_LT(conf[static_cast<std::size_t>(i)], rep.threshold);
      ASSERT_GE(rep.kept.size(), prev);
      prev = rep.kept.size();
    }
  }
}

TEST(ShouldEarlyStop, FiveOfSeven) {
  const auto a = sizes_of({5, 2});
  EXPECT_NEAR(a.largest_fraction, 0.714, 1e-3);
  EXPECT_TRUE(should_early_stop(a, 0.7, 4, 4));
  EXPECT_TRUE(should_early_stop(a, 0.7, 6, 4));
  EXPECT_FALSE(should_early_stop(a, 0.7, 3, 4));
  EXPECT_FALSE(should_early_stop(a, 1.0, 8, 4));
  EXPECT_FALSE(should_early_stop(a, 0.75, 8, 4));
}

TEST(ShouldEarlyStop, SingletonsAndUnanimous) {
  EXPECT_FALSE(should_early_stop(sizes_of({1, 1, 1, 1}), 0.7, 5, 1));
  EXPECT_TRUE(should_early_stop(sizes_of({6}), 1.0, 5, 1));
  EXPECT_THROW(should_early_stop(sizes_of({6}), 1.0, 0, 1), DomainError);
}

TEST(ShouldEarlyStop, AntitoneInDelta) {
  const auto a = sizes_of({3, 2, 2});
  bool was = true;
  for (double delta = 0.0; delta <= 1.0; delta += 0.01) {
    const bool now = should_early_stop(a, delta, 5, 4);
    EXPECT_TRUE(was || !now);
    was = now;
  }
}

}  // namespace
}  // namespace phi
