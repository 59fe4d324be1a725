#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "phi/synthetic_suite.hpp"

namespace phi {
namespace {

TEST(SpecBuilder, StepsAndAnswers) {
  SpecBuilder sb("P:\n", "x");
  const auto mid = sb.step(sb.root(), {"go", " on\n"}, 0.75);
  sb.answer(mid, {"The answer is x.\n"}, 1.0, "x");
  sb.answer(sb.step(sb.root(), {"stop\n"}, 0.25), {"The answer is y.\n"}, 1.0, "y");
  const auto spec = std::move(sb).build();
  const auto t = enumerate_trajectories(spec);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].text(), "go on\nThe answer is x.\n");
  EXPECT_DOUBLE_EQ(t[0].probability, 0.75);
  EXPECT_EQ(spec.max_depth, 3);
}

TEST(SpecBuilder, RejectsUnnormalizedTree) {
  SpecBuilder sb("P:\n", "x");
  sb.answer(sb.step(sb.root(), {"a\n"}, 0.5), {"The answer is x.\n"}, 1.0, "x");
  EXPECT_THROW(std::move(sb).build(), SpecError);
}

TEST(ConsensusSuite, ValidDistinctAndDeterministic) {
  const auto suite = generate_consensus_suite(20, 1);
  ASSERT_EQ(suite.size(), 20u);
  std::set<std::string> prompts;
  const std::regex numbers(R"((\d+) (?:multiplied by|times) (\d+))");
  for (const auto& spec : suite) {
    EXPECT_NO_THROW(spec.validate());
    prompts.insert(spec.prompt);
    std::smatch m;
    ASSERT_TRUE(std::regex_search(spec.prompt, m, numbers)) << spec.prompt;
    EXPECT_EQ(spec.correct_answer, std::to_string(std::stoi(m[1]) * std::stoi(m[2])));
    std::set<std::string> answers;
    for (const auto& t : enumerate_trajectories(spec)) answers.insert(t.answer);
    EXPECT_GE(answers.size(), 3u);
    EXPECT_TRUE(answers.count(spec.correct_answer));
  }
  EXPECT_EQ(prompts.size(), suite.size());

  const auto again = generate_consensus_suite(20, 1);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    EXPECT_EQ(nlohmann::json(suite[i]), nlohmann::json(again[i]));
  }
  EXPECT_NE(nlohmann::json(generate_consensus_suite(1, 2)[0]), nlohmann::json(suite[0]));
}

TEST(ConsensusSuite, KindsAlternate) {
  const auto suite = generate_consensus_suite(6, 8);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const bool trap = suite[i].prompt.find("multiplied by") != std::string::npos;
    EXPECT_EQ(trap, i % 2 == 0) << suite[i].prompt;
  }
}

TEST(ConsensusSuite, CorrectAnswerIsMostLikelyButNotCertain) {
  for (const auto& spec : generate_consensus_suite(20, 3)) {
    std::map<std::string, double> mass;
    for (const auto& t : enumerate_trajectories(spec)) mass[t.answer] += t.probability;
    const double correct = mass.at(spec.correct_answer);
    EXPECT_LT(correct, 0.9);
    EXPECT_GE(correct, 0.5);
  }
}

}  // namespace
}  // namespace phi
