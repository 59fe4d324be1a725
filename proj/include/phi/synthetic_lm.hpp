#pragma once

#include <atomic>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "phi/lm_backend.hpp"

namespace phi {

struct Transition {
  std::string token;
  double prob = 0.0;
  std::string next;
};

/// Acyclic weighted state machine over string tokens. Contexts handed to the
/// model are `prompt` followed by tokens; the model re-parses them from
/// `start` to find its state, so token strings leaving one state must be
/// prefix-free.
struct SyntheticLMSpec {
  std::string prompt;
  std::vector<std::string> vocabulary;
  std::string start = "s0";
  std::map<std::string, std::vector<Transition>> transitions;
  std::map<std::string, std::string> terminals;  // state -> answer label
  std::string correct_answer;
  int max_depth = 1;

  /// Throws SpecError.
  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticLMSpec& spec);
void from_json(const nlohmann::json& j, SyntheticLMSpec& spec);

/// A file holds either one spec object or {"specs": [...]}.
std::vector<SyntheticLMSpec> load_synthetic_specs(const std::string& path);
void save_synthetic_specs(const std::string& path, const std::vector<SyntheticLMSpec>& specs);

struct Trajectory {
  std::vector<std::string> tokens;
  double probability = 0.0;
  std::string answer;

  std::string text() const;
};

/// Every start-to-terminal path with its exact probability. Throws SpecError
/// on a cycle or a dangling state.
std::vector<Trajectory> enumerate_trajectories(const SyntheticLMSpec& spec);

/// Copy whose transition probabilities follow the temperature rule of the
/// sampler: p^(1/T) renormalized per state; T = 0 puts all mass on the first
/// most likely token.
SyntheticLMSpec tempered(const SyntheticLMSpec& spec, double temperature);

/// In-process backend over one or more specs. A request is routed to the SyntheticLMSpec
/// with the longest prompt that prefixes it.
class SyntheticLM final : public LanguageModel {
 public:
  explicit SyntheticLM(SyntheticLMSpec spec);
  explicit SyntheticLM(std::vector<SyntheticLMSpec> specs);

  std::vector<GenerationResult> generate(const GenerationRequest& request) override;
  std::string describe() const override;

  /// Total tokens emitted across all calls.
  std::int64_t tokens_generated() const noexcept { return tokens_generated_.load(); }

  const std::vector<SyntheticLMSpec>& specs() const noexcept { return specs_; }

  /// Exact probability that free sampling at `temperature` from `context`
  /// ends in the routed spec's correct answer.
  double success_probability(const std::string& context, double temperature) const;

 private:
  struct Located {
    const SyntheticLMSpec* spec;
    std::string state;
  };
  Located locate(std::string_view context) const;

  std::vector<SyntheticLMSpec> specs_;
  std::atomic<std::int64_t> tokens_generated_{0};
};

}  // namespace phi
