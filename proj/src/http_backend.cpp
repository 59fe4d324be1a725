#include "phi/http_backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace phi {

TokenBucket::TokenBucket(double rate, double capacity)
    : rate_(rate), capacity_(std::max(1.0, capacity)), tokens_(capacity_), last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = Clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

HttpBackendOptions HttpBackendOptions::from_environment(HttpBackendOptions o) {
  if (const char* v = std::getenv("PHI_ENDPOINT"); v && *v) o.base_url = v;
  if (const char* v = std::getenv("PHI_MODEL"); v && *v) o.model = v;
  if (const char* v = std::getenv("PHI_API_KEY"); v && *v) {
    o.api_key = v;
  } else if (const char* k = std::getenv("OPENAI_API_KEY"); k && *k && o.api_key.empty()) {
    o.api_key = k;
  }
  return o;
}

HttpBackendOptions HttpBackendOptions::from_environment() { return from_environment(HttpBackendOptions{}); }

nlohmann::json build_completion_request(const GenerationRequest& r, const std::string& model) {
  nlohmann::json body{
      {"model", model},           {"prompt", r.prompt}, {"max_tokens", r.max_tokens},
      {"temperature", r.temperature}, {"n", r.n_samples}, {"logprobs", 1},
  };
  if (!r.stop_sequences.empty()) body["stop"] = r.stop_sequences;
  return body;
}

std::vector<GenerationResult> parse_completion_response(const nlohmann::json& body,
                                                        const GenerationRequest& request) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array()) {
    throw ProtocolError("completion response has no choices array");
  }
  const auto& choices = body["choices"];
  if (choices.size() != static_cast<std::size_t>(request.n_samples)) {
    throw ProtocolError("completion response has " + std::to_string(choices.size()) +
                        " choices, expected " + std::to_string(request.n_samples));
  }
  std::vector<GenerationResult> out(choices.size());
  std::vector<bool> seen(choices.size(), false);
  for (std::size_t pos = 0; pos < choices.size(); ++pos) {
    const auto& c = choices[pos];
    std::size_t idx = pos;
    if (c.contains("index") && c["index"].is_number_integer()) {
      idx = c["index"].get<std::size_t>();
      if (idx >= out.size() || seen[idx]) throw ProtocolError("bad choice index");
    }
    seen[idx] = true;
    GenerationResult& r = out[idx];
    if (!c.contains("text") || !c["text"].is_string()) throw ProtocolError("choice without text");
    r.text = c["text"].get<std::string>();

    if (!c.contains("logprobs") || !c["logprobs"].is_object()) {
      throw ProtocolError("choice without logprobs; the endpoint must return per-token log-probs");
    }
    const auto& lp = c["logprobs"];
    if (!lp.contains("token_logprobs") || !lp["token_logprobs"].is_array()) {
      throw ProtocolError("logprobs without token_logprobs");
    }
    for (const auto& v : lp["token_logprobs"]) {
      if (!v.is_number()) throw ProtocolError("non-numeric token log-prob");
      double x = v.get<double>();
      // Servers occasionally report tiny positive values from float rounding.
      if (x > 0.0 && x < 1e-6) x = 0.0;
      if (!std::isfinite(x) || x > 0.0) throw ProtocolError("token log-prob out of range");
      r.token_logprobs.push_back(x);
    }
    if (lp.contains("tokens") && lp["tokens"].is_array() &&
        lp["tokens"].size() != r.token_logprobs.size()) {
      throw ProtocolError("tokens and token_logprobs lengths differ");
    }

    const std::string reason = c.value("finish_reason", std::string("stop"));
    if (reason == "length") {
      r.finish_reason = FinishReason::kLength;
    } else if (c.contains("stop_reason")) {
      // vLLM: null for end of sequence, the matched string or token id otherwise.
      r.finish_reason = c["stop_reason"].is_null() ? FinishReason::kEos : FinishReason::kStopSequence;
    } else {
      r.finish_reason =
          request.stop_sequences.empty() ? FinishReason::kEos : FinishReason::kStopSequence;
    }
  }
  return out;
}

namespace {

void split_url(const std::string& url, std::string& host, std::string& prefix) {
  const auto scheme = url.find("://");
  const auto start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', start);
  host = slash == std::string::npos ? url : url.substr(0, slash);
  prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  split_url(options_.base_url, host_, path_prefix_);
  if (host_.empty()) throw DomainError("http backend needs a base URL");
}

std::string HttpBackend::describe() const {
  return "http(" + options_.base_url + ", model=" + options_.model + ")";
}

std::vector<GenerationResult> HttpBackend::generate(const GenerationRequest& request) {
  request.validate();
  const std::string body = build_completion_request(request, options_.model).dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    if (options_.limiter) options_.limiter->acquire();

    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(path_prefix_ + "/completions", headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProtocolError("HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw ProtocolError("completion response is not JSON");
    return parse_completion_response(parsed, request);
  }
  throw TransportError(describe() + " unreachable after " +
                       std::to_string(options_.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace phi
