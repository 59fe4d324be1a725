#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phi/core.hpp"

namespace phi {

enum class FinishReason { kStopSequence, kLength, kEos };

const char* to_string(FinishReason r) noexcept;

struct GenerationRequest {
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.6;
  std::vector<std::string> stop_sequences;
  bool want_logprobs = true;
  int n_samples = 1;
  // Per-request sampling seed. Backends that sample locally derive their
  // stream from it, so results do not depend on completion order.
  std::uint64_t seed = 0;

  void validate() const;
};

struct GenerationResult {
  std::string text;
  std::vector<double> token_logprobs;
  FinishReason finish_reason = FinishReason::kEos;

  std::size_t token_count() const noexcept { return token_logprobs.size(); }
};

/// Step-level language model. Implementations must accept concurrent calls.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  /// Returns exactly request.n_samples results.
  virtual std::vector<GenerationResult> generate(const GenerationRequest& request) = 0;

  virtual std::string describe() const = 0;
};

/// Mean of natural-log token probabilities. Throws DomainError on empty input.
double avg_logprob(std::span<const double> token_logprobs);

struct StepOptions {
  std::string step_delimiter = "\n";
  std::string answer_marker = "The answer is";
  int max_tokens = 256;
  double temperature = 0.6;
};

/// Samples request.n_samples next steps after `context`.
///
/// A step ends at the step delimiter. Backends that strip the stop sequence
/// from returned text get it re-appended so that concatenated steps rebuild
/// the context exactly. A sample is terminal when the model ended the
/// sequence or the step contains the answer marker.
std::vector<StepSample> rollout_step(LanguageModel& lm, const std::string& context, int n,
                                     const StepOptions& opts, std::uint64_t seed);

/// Simulated continuation after a candidate step. A terminal candidate needs
/// no future and yields an empty result without calling the backend.
GenerationResult foresight(LanguageModel& lm, const std::string& context_with_candidate,
                           const StepSample& candidate, int budget_tokens, double temperature,
                           std::uint64_t seed, const std::vector<std::string>& stop = {});

/// Single free-running continuation up to end of sequence or the budget.
GenerationResult complete(LanguageModel& lm, const std::string& context, int budget_tokens,
                          double temperature, std::uint64_t seed,
                          const std::vector<std::string>& stop = {});

}  // namespace phi
