#pragma once

#include <optional>
#include <string>

#include "phi/core.hpp"
#include "phi/lm_backend.hpp"

namespace phi {

enum class StopReason { kEarlyStop, kTMaxReached, kAllBeamsFinished, kTokenBudget };

const char* to_string(StopReason r) noexcept;

struct DecodeResult {
  std::string final_text;
  std::optional<std::string> extracted_answer;
  DecodeTrace trace;
  StopReason stop_reason = StopReason::kTMaxReached;
};

/// A backend failure during decoding, with the trace collected so far.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, DecodeTrace partial, bool retryable)
      : Error(what), trace_(std::move(partial)), retryable_(retryable) {}
  const DecodeTrace& trace() const noexcept { return trace_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  DecodeTrace trace_;
  bool retryable_;
};

/// Step-beam search with foresight sampling, joint Advantage/Alignment step
/// values, in-width pruning and cluster-consensus early stopping.
///
/// Each timestep rolls out N candidate steps per live beam, drops low
/// confidence candidates over the whole pool, simulates a future for each
/// survivor, scores it, and samples M beams without replacement from the
/// survivors plus already finished beams. After the loop every unfinished
/// beam is completed in one free-running call and a single beam is picked
/// by its last weight.
DecodeResult phi_decode(const std::string& task_prompt, const DecodingConfig& cfg,
                        LanguageModel& lm);

/// One sampled chain-of-thought continuation.
DecodeResult autoregressive_decode(const std::string& task_prompt, const DecodingConfig& cfg,
                                   LanguageModel& lm);

enum class Ablation { kNoForesight, kNoCluster, kNoPruning };

DecodeResult run_ablation(Ablation variant, const std::string& task_prompt, DecodingConfig cfg,
                          LanguageModel& lm);

/// Text after the last answer marker on its line, trimmed of whitespace,
/// a leading ':' and a trailing '.'. A non-empty `pattern` is an ECMAScript
/// regex; its last match's first group (or whole match) wins instead.
std::optional<std::string> extract_answer(const std::string& text, const std::string& marker,
                                          const std::string& pattern = {});

}  // namespace phi
