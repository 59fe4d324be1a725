#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "phi/core.hpp"
#include "test_util.hpp"

namespace phi {
namespace {

std::vector<std::uint64_t> draws(RandomStream rng, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(rng.next_u64());
  return out;
}

TEST(SeededRng, SameSeedAndLabelRepeat) {
  EXPECT_EQ(draws(seeded_rng(42, "sampling"), 100), draws(seeded_rng(42, "sampling"), 100));
}

TEST(SeededRng, LabelsGiveDifferentStreams) {
  EXPECT_NE(draws(seeded_rng(42, "sampling"), 100), draws(seeded_rng(42, "kmeans"), 100));
}

TEST(SeededRng, SeedsGiveDifferentStreams) {
  EXPECT_NE(draws(seeded_rng(1, "x"), 100), draws(seeded_rng(2, "x"), 100));
}

TEST(SeededRng, UniformInUnitInterval) {
  auto rng = seeded_rng(7, "u");
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(SeededRng, BelowCoversRangeEvenly) {
  auto rng = seeded_rng(9, "below");
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[rng.below(6)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(SeededRng, ForkIsDeterministicAndDistinct) {
  auto a = seeded_rng(3, "root");
  auto b = seeded_rng(3, "root");
  EXPECT_EQ(draws(a.fork("child"), 10), draws(b.fork("child"), 10));
  EXPECT_NE(draws(a.fork("child"), 10), draws(a.fork("other"), 10));
}

TEST(SampleCategorical, RejectsBadWeights) {
  auto rng = seeded_rng(0, "c");
  EXPECT_THROW(sample_categorical({}, rng), DomainError);
  EXPECT_THROW(sample_categorical({0.0, 0.0}, rng), DomainError);
  EXPECT_THROW(sample_categorical({1.0, -1.0}, rng), DomainError);
  EXPECT_THROW(sample_categorical({1.0, std::nan("")}, rng), DomainError);
}

TEST(SampleCategorical, MatchesWeights) {
  auto rng = seeded_rng(5, "c");
  std::vector<int> hist(3, 0);
  for (int i = 0; i < 100000; ++i) ++hist[sample_categorical({1.0, 2.0, 0.0}, rng)];
  EXPECT_EQ(hist[2], 0);
  EXPECT_NEAR(hist[0] / 100000.0, 1.0 / 3.0, 0.01);
}

TEST(DecodingConfig, Defaults) {
  const DecodingConfig c;
  EXPECT_EQ(c.step_beam_size, 4);
  EXPECT_EQ(c.rollouts_per_beam, 4);
  EXPECT_EQ(c.foresight_min, 4);
  EXPECT_EQ(c.foresight_max, 8);
  EXPECT_EQ(c.num_clusters, 3);
  EXPECT_DOUBLE_EQ(c.early_stop_threshold, 0.7);
  EXPECT_DOUBLE_EQ(c.temp_advantage, 0.6);
  EXPECT_DOUBLE_EQ(c.temp_alignment, 0.6);
  EXPECT_DOUBLE_EQ(c.temp_outer, 1.0);
  EXPECT_EQ(c.width_prune_k, 1);
  EXPECT_DOUBLE_EQ(c.gen_temperature, 0.6);
  EXPECT_FALSE(c.token_budget.has_value());
  EXPECT_NO_THROW(c.validate());
}

struct Violation {
  const char* name;
  void (*mutate)(DecodingConfig&);
  ConfigViolation expected;
};

class ConfigValidation : public ::testing::TestWithParam<Violation> {};

TEST_P(ConfigValidation, RejectsWithDistinctError) {
  DecodingConfig c;
  GetParam().mutate(c);
  try {
    c.validate();
    FAIL() << "accepted " << GetParam().name;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.violation(), GetParam().expected);
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllInvariants, ConfigValidation,
    ::testing::Values(
        Violation{"M0", [](DecodingConfig& c) { c.step_beam_size = 0; }, ConfigViolation::kStepBeamSize},
        Violation{"N0", [](DecodingConfig& c) { c.rollouts_per_beam = 0; }, ConfigViolation::kRolloutsPerBeam},
        Violation{"Tmin0", [](DecodingConfig& c) { c.foresight_min = 0; }, ConfigViolation::kForesightMin},
        Violation{"TminAboveTmax", [](DecodingConfig& c) { c.foresight_min = 9; }, ConfigViolation::kForesightOrder},
        Violation{"K0", [](DecodingConfig& c) { c.num_clusters = 0; }, ConfigViolation::kNumClusters},
        Violation{"DeltaHigh", [](DecodingConfig& c) { c.early_stop_threshold = 1.5; },
                  ConfigViolation::kEarlyStopThreshold},
        Violation{"DeltaLow", [](DecodingConfig& c) { c.early_stop_threshold = -0.1; },
                  ConfigViolation::kEarlyStopThreshold},
        Violation{"Tau1", [](DecodingConfig& c) { c.temp_advantage = 0.0; }, ConfigViolation::kTempAdvantage},
        Violation{"Tau2", [](DecodingConfig& c) { c.temp_alignment = -1.0; }, ConfigViolation::kTempAlignment},
        Violation{"TauOuter", [](DecodingConfig& c) { c.temp_outer = 0.0; }, ConfigViolation::kTempOuter},
        Violation{"WidthK", [](DecodingConfig& c) { c.width_prune_k = 0; }, ConfigViolation::kWidthPruneK},
        Violation{"GenTemp", [](DecodingConfig& c) { c.gen_temperature = -0.1; }, ConfigViolation::kGenTemperature},
        Violation{"Budget", [](DecodingConfig& c) { c.token_budget = 0; }, ConfigViolation::kTokenBudget},
        Violation{"MaxTokens", [](DecodingConfig& c) { c.foresight_max_tokens = 0; }, ConfigViolation::kMaxTokens},
        Violation{"Weights", [](DecodingConfig& c) { c.advantage_weight = c.alignment_weight = 0.0; },
                  ConfigViolation::kRewardWeights},
        Violation{"Delimiter", [](DecodingConfig& c) { c.step_delimiter.clear(); }, ConfigViolation::kStepDelimiter}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(DecodingConfig, JsonRoundTripIsExact) {
  auto rng = seeded_rng(11, "config");
  for (int i = 0; i < 500; ++i) {
    DecodingConfig c;
    c.step_beam_size = 1 + static_cast<int>(rng.below(16));
    c.rollouts_per_beam = 1 + static_cast<int>(rng.below(16));
    c.foresight_min = 1 + static_cast<int>(rng.below(4));
    c.foresight_max = c.foresight_min + static_cast<int>(rng.below(8));
    c.num_clusters = 1 + static_cast<int>(rng.below(5));
    c.early_stop_threshold = rng.uniform();
    c.temp_advantage = 1e-3 + rng.uniform() * 3.0;
    c.temp_alignment = 1e-3 + rng.uniform() * 3.0;
    c.temp_outer = 1e-3 + rng.uniform() * 3.0;
    c.gen_temperature = rng.uniform() * 2.0;
    c.seed = rng.next_u64();
    c.disable_foresight = rng.below(2) == 1;
    c.disable_cluster = rng.below(2) == 1;
    c.disable_pruning = rng.below(2) == 1;
    if (rng.below(2) == 1) c.token_budget = 1 + static_cast<std::int64_t>(rng.below(1u << 30));
    c.advantage_weight = rng.uniform();
    c.alignment_weight = 0.5 + rng.uniform();
    c.completion_stop = {"\n\n", std::to_string(rng.below(100))};
    c.finalize_argmax = rng.below(2) == 1;
    c.validate();

    nlohmann::json j = c;
    const auto back = nlohmann::json::parse(j.dump()).get<DecodingConfig>();
    ASSERT_EQ(back, c) << j.dump();
  }
}

TEST(DecodingConfig, AbsentFieldsKeepDefaults) {
  testing::TempDir dir;
  const auto path = dir.file("cfg.json");
  testing::write_text(path, R"({"step_beam_size": 2, "temp_outer": 0.5})");
  const auto c = load_config(path);
  DecodingConfig expected;
  expected.step_beam_size = 2;
  expected.temp_outer = 0.5;
  EXPECT_EQ(c, expected);
}

TEST(DecodingConfig, LoadRejectsBadFiles) {
  testing::TempDir dir;
  EXPECT_THROW(load_config(dir.file("missing.json")), IoError);
  const auto bad = dir.file("bad.json");
  testing::write_text(bad, R"({"step_beam_size": "four"})");
  EXPECT_THROW(load_config(bad), ConfigError);
  const auto invalid = dir.file("invalid.json");
  testing::write_text(invalid, R"({"foresight_min": 10})");
  EXPECT_THROW(load_config(invalid), ConfigError);
}

TEST(StepSample, ConfidenceIsMeanLogprob) {
  const auto s = make_step_sample("a\n", {-0.1, -0.2, -0.3}, false);
  EXPECT_NEAR(s.confidence, -0.2, 1e-15);
  EXPECT_THROW(make_step_sample("x", {}, false), DomainError);
  EXPECT_THROW(make_step_sample("x", {0.1}, false), DomainError);
  EXPECT_THROW(make_step_sample("x", {-std::numeric_limits<double>::infinity()}, false), DomainError);
}

TEST(Beam, AppendTracksTokensAndText) {
  Beam b;
  b.append(make_step_sample("one\n", {-0.1, 0.0}, false));
  b.append(make_step_sample("two\n", {-0.5}, true));
  EXPECT_EQ(b.text(), "one\ntwo\n");
  EXPECT_EQ(b.total_tokens, 3);
  EXPECT_TRUE(b.finished);
}

TEST(DecodeTrace, ReconciledTokensSumPhases) {
  DecodeTrace t;
  t.steps.resize(2);
  t.steps[0].rollout_tokens = 5;
  t.steps[0].foresight_tokens = 7;
  t.steps[1].rollout_tokens = 3;
  t.completion_tokens = 11;
  EXPECT_EQ(t.rollout_tokens(), 8);
  EXPECT_EQ(t.foresight_tokens(), 7);
  EXPECT_EQ(t.reconciled_tokens(), 26);
}

}  // namespace
}  // namespace phi
