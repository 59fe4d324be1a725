#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phi/synthetic_lm.hpp"

namespace phi {

/// Incremental construction of a SyntheticLMSpec as a tree of steps.
class SpecBuilder {
 public:
  explicit SpecBuilder(std::string prompt, std::string correct_answer);

  const std::string& root() const noexcept { return root_; }

  /// Adds a step leaving `from`: the first token carries `prob`, the rest
  /// follow with certainty. Returns the state after the last token.
  std::string step(const std::string& from, const std::vector<std::string>& tokens, double prob);

  /// Adds a final answer step ending in a terminal labelled `answer`.
  void answer(const std::string& from, const std::vector<std::string>& tokens, double prob,
              const std::string& answer);

  /// Validates and returns the built SyntheticLMSpec.
  SyntheticLMSpec build() &&;

 private:
  std::string fresh();

  SyntheticLMSpec spec_;
  std::string root_;
  int next_id_ = 0;
};

enum class SuiteKind {
  // The locally likely first step leads into a low-probability, scattered
  // future; the correct step has a confident, consistent one.
  kMyopicTrap,
  // A wrong step is slightly more confident in foresight, but the correct
  // answer is reached by the majority of consistent foresight paths.
  kConfidentOutlier,
};

/// Deterministic family of specs for directional experiments where the
/// correct answer has the more consistent foresight paths. Kinds alternate
/// through the suite; every spec gets a distinct prompt.
std::vector<SyntheticLMSpec> generate_consensus_suite(int count, std::uint64_t seed);

SyntheticLMSpec make_suite_spec(SuiteKind kind, int index, RandomStream& rng);

}  // namespace phi
