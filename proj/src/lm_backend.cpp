#include "phi/lm_backend.hpp"

#include <cmath>

namespace phi {

const char* to_string(FinishReason r) noexcept {
  switch (r) {
    case FinishReason::kStopSequence:
      return "stop_sequence";
    case FinishReason::kLength:
      return "length";
    case FinishReason::kEos:
      return "eos";
  }
  return "unknown";
}

void GenerationRequest::validate() const {
  if (max_tokens < 1) throw DomainError("max_tokens must be >= 1");
  if (n_samples < 1) throw DomainError("n_samples must be >= 1");
  if (!(temperature >= 0.0)) throw DomainError("temperature must be >= 0");
}

double avg_logprob(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw DomainError("avg_logprob of an empty sequence");
  double sum = 0.0;
  for (double lp : token_logprobs) sum += lp;
  return sum / static_cast<double>(token_logprobs.size());
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<GenerationResult> checked_generate(LanguageModel& lm, const GenerationRequest& req) {
  req.validate();
  auto results = lm.generate(req);
  if (results.size() != static_cast<std::size_t>(req.n_samples)) {
    throw ProtocolError("backend returned " + std::to_string(results.size()) + " samples, expected " +
                        std::to_string(req.n_samples));
  }
  for (const auto& r : results) {
    for (double lp : r.token_logprobs) {
      if (!std::isfinite(lp) || lp > 0.0) throw ProtocolError("backend returned an invalid log-prob");
    }
  }
  return results;
}

}  // namespace

std::vector<StepSample> rollout_step(LanguageModel& lm, const std::string& context, int n,
                                     const StepOptions& opts, std::uint64_t seed) {
  if (context.empty()) throw DomainError("rollout_step needs a non-empty prompt");
  GenerationRequest req;
  req.prompt = context;
  req.max_tokens = opts.max_tokens;
  req.temperature = opts.temperature;
  req.stop_sequences = {opts.step_delimiter};
  req.n_samples = n;
  req.seed = seed;

  auto results = checked_generate(lm, req);
  std::vector<StepSample> out;
  out.reserve(results.size());
  for (auto& r : results) {
    if (r.token_logprobs.empty()) throw ProtocolError("backend returned a step without tokens");
    if (r.finish_reason == FinishReason::kStopSequence && !ends_with(r.text, opts.step_delimiter)) {
      r.text += opts.step_delimiter;
    }
    const bool terminal = r.finish_reason == FinishReason::kEos ||
                          (!opts.answer_marker.empty() &&
                           r.text.find(opts.answer_marker) != std::string::npos);
    out.push_back(make_step_sample(std::move(r.text), std::move(r.token_logprobs), terminal));
  }
  return out;
}

GenerationResult foresight(LanguageModel& lm, const std::string& context_with_candidate,
                           const StepSample& candidate, int budget_tokens, double temperature,
                           std::uint64_t seed, const std::vector<std::string>& stop) {
  if (budget_tokens < 1) throw DomainError("foresight budget must be >= 1 token");
  if (candidate.is_terminal) return GenerationResult{{}, {}, FinishReason::kEos};
  return complete(lm, context_with_candidate, budget_tokens, temperature, seed, stop);
}

GenerationResult complete(LanguageModel& lm, const std::string& context, int budget_tokens,
                          double temperature, std::uint64_t seed,
                          const std::vector<std::string>& stop) {
  GenerationRequest req;
  req.stop_sequences = stop;
  req.prompt = context;
  req.max_tokens = budget_tokens;
  req.temperature = temperature;
  req.n_samples = 1;
  req.seed = seed;
  auto results = checked_generate(lm, req);
  return std::move(results.front());
}

}  // namespace phi
