#include <gtest/gtest.h>

#include <sstream>

#include "phi/metrics.hpp"
#include "phi/synthetic_lm.hpp"
#include "test_util.hpp"

namespace phi {
namespace {

TEST(Flops, Examples) {
  EXPECT_DOUBLE_EQ(flops(1000, 8.03e9), 4.818e13);
  EXPECT_EQ(flops(0, 8e9), 0.0);
  EXPECT_THROW(flops(-1, 1.0), DomainError);
}

TEST(Flops, BitExactAndLinear) {
  auto rng = seeded_rng(1, "flops");
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::int64_t>(rng.below(1u << 24));
    const double p = 1e6 + rng.uniform() * 1e11;
    ASSERT_EQ(flops(n, p), 6.0 * static_cast<double>(n) * p);
  }
  EXPECT_EQ(flops(20, 5.0), 2.0 * flops(10, 5.0));
}

TEST(FlopsReport, SumsPhases) {
  DecodeTrace t;
  t.steps.resize(2);
  t.steps[0].rollout_tokens = 10;
  t.steps[1].foresight_tokens = 30;
  t.completion_tokens = 5;
  const auto r = flops_report(t, 2.0);
  EXPECT_EQ(r.total_output_tokens, 45);
  EXPECT_EQ(r.flops, 6.0 * 45 * 2.0);
}

TEST(StepValueAccuracy, Examples) {
  const std::vector<double> half{0.5, 0.5}, left{1, 0}, right{0, 1};
  EXPECT_EQ(step_value_accuracy(half, half), 1.0);
  EXPECT_EQ(step_value_accuracy(left, right), 0.0);
  EXPECT_EQ(step_value_accuracy(half, left), 0.75);
  EXPECT_THROW(step_value_accuracy(half, std::vector<double>{1.0}), DomainError);
}

TEST(StepValueAccuracy, SymmetricAndBounded) {
  auto rng = seeded_rng(2, "sva");
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 1 + rng.below(16);
    std::vector<double> a(n), b(n);
    double sa = 0, sb = 0;
    for (std::size_t j = 0; j < n; ++j) {
      sa += a[j] = rng.uniform();
      sb += b[j] = rng.uniform();
    }
    for (std::size_t j = 0; j < n; ++j) {
      a[j] /= sa;
      b[j] /= sb;
    }
    const double ab = step_value_accuracy(a, b);
    ASSERT_EQ(ab, step_value_accuracy(b, a));
    ASSERT_LE(ab, 1.0);
  }
}

TEST(StepValues, EstimatedBinaryAndOutcome) {
  ScoredSet set;
  set.records.resize(3);
  set.records[0].reward = 1.0;
  set.records[1].reward = 0.5;
  set.records[2].reward = 0.5;
  EXPECT_EQ(estimated_step_values(set), (std::vector<double>{0.5, 0.25, 0.25}));
  EXPECT_EQ(binary_step_values(4, std::vector<int>{1, 3, 3}), (std::vector<double>{0, 1, 0, 1}));
  const auto out = outcome_distribution(std::vector<double>{0.2, 0.6});
  EXPECT_NEAR(out[0], 0.25, 1e-15);
  EXPECT_NEAR(out[1], 0.75, 1e-15);
  EXPECT_EQ(outcome_distribution(std::vector<double>{0, 0, 0, 0}), (std::vector<double>(4, 0.25)));
}

TEST(StepValues, SyntheticUsesExactSuccess) {
  const auto spec = testing::branch_spec({{"A", 0.5, "a"}, {"B", 0.5, "b"}}, "a");
  SyntheticLM lm(spec);
  DecodeTrace trace;
  trace.steps.resize(1);
  auto& recs = trace.steps[0].scored.records;
  recs.resize(2);
  recs[0].path_text = "A";
  recs[0].reward = 0.75;
  recs[1].path_text = "B";
  recs[1].reward = 0.25;
  // P1 = [0.75, 0.25], P2 = [1, 0]: 1 - (0.0625 + 0.0625) / 2.
  EXPECT_DOUBLE_EQ(synthetic_step_value_accuracy(trace, lm, spec.prompt, 1.0), 0.9375);
}

TEST(Answers, Normalization) {
  EXPECT_EQ(normalize_answer("  The  Cat. "), "the cat");
  EXPECT_EQ(normalize_answer("$1,234"), "1234");
  EXPECT_TRUE(answers_match("42.0", "42"));
  EXPECT_TRUE(answers_match("1,000.", "1000"));
  EXPECT_TRUE(answers_match("B", " b "));
  EXPECT_FALSE(answers_match("42", "43"));
  EXPECT_FALSE(answers_match("", "0"));
}

TEST(PassAt1, Examples) {
  const std::vector<std::string> gold{"1", "2", "3", "4"};
  std::vector<std::optional<std::string>> all{"1", "2", "3", "4"}, none{"9", std::nullopt, "8", "7"},
      three{"1", "2", "3", std::nullopt};
  EXPECT_EQ(pass_at_1(all, gold), 1.0);
  EXPECT_EQ(pass_at_1(none, gold), 0.0);
  EXPECT_EQ(pass_at_1(three, gold), 0.75);
  EXPECT_THROW(pass_at_1(std::span<const std::optional<std::string>>(three).first(2), gold), DomainError);
}

TEST(Report, TableAndJsonl) {
  std::ostringstream out;
  print_summary_table(out, {{"autoregressive", 0.5, 1e12, std::nullopt}, {"phi", 0.75, 5e13, 0.25}});
  const auto s = out.str();
  EXPECT_NE(s.find("75.00"), std::string::npos);
  EXPECT_NE(s.find("+25.00"), std::string::npos);
  std::ostringstream lines;
  emit_record(lines, {{"a", 1}});
  emit_record(lines, {{"b", 2}});
  EXPECT_EQ(lines.str(), "{\"a\":1}\n{\"b\":2}\n");
}

}  // namespace
}  // namespace phi
