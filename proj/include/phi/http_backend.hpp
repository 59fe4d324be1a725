#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "phi/lm_backend.hpp"

namespace phi {

/// Shared request limiter: `rate` tokens per second, bursts up to `capacity`.
/// A non-positive rate disables limiting.
class TokenBucket {
 public:
  TokenBucket(double rate, double capacity);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mu_;
};

struct HttpBackendOptions {
  std::string base_url = "http://localhost:8000/v1";  // scheme://host[:port][/prefix]
  std::string model;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  std::shared_ptr<TokenBucket> limiter;

  /// Fills endpoint, model and key from PHI_ENDPOINT, PHI_MODEL and
  /// PHI_API_KEY (falling back to OPENAI_API_KEY) where those are set.
  static HttpBackendOptions from_environment(HttpBackendOptions defaults);
  static HttpBackendOptions from_environment();
};

/// JSON body for POST {base_url}/completions.
nlohmann::json build_completion_request(const GenerationRequest& request, const std::string& model);

/// Parses an OpenAI-style completions response. Throws ProtocolError when
/// per-token log-probs are missing or malformed; never fills them in.
std::vector<GenerationResult> parse_completion_response(const nlohmann::json& body,
                                                        const GenerationRequest& request);

/// Client for OpenAI-compatible /completions endpoints with log-probs.
class HttpBackend final : public LanguageModel {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::vector<GenerationResult> generate(const GenerationRequest& request) override;
  std::string describe() const override;

 private:
  HttpBackendOptions options_;
  std::string host_;  // scheme://host:port
  std::string path_prefix_;
};

}  // namespace phi
