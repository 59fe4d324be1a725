#include "phi/core.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace phi {

namespace {

void require(bool ok, ConfigViolation v, const char* what) {
  if (!ok) throw ConfigError(v, what);
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(ConfigViolation::kMalformed,
                        std::string("config field '") + key + "': " + e.what());
    }
  }
}

}  // namespace

void DecodingConfig::validate() const {
  require(step_beam_size >= 1, ConfigViolation::kStepBeamSize, "step_beam_size must be >= 1");
  require(rollouts_per_beam >= 1, ConfigViolation::kRolloutsPerBeam,
          "rollouts_per_beam must be >= 1");
  require(foresight_min >= 1, ConfigViolation::kForesightMin, "foresight_min must be >= 1");
  require(foresight_min <= foresight_max, ConfigViolation::kForesightOrder,
          "foresight_min must not exceed foresight_max");
  require(num_clusters >= 1, ConfigViolation::kNumClusters, "num_clusters must be >= 1");
  require(early_stop_threshold >= 0.0 && early_stop_threshold <= 1.0,
          ConfigViolation::kEarlyStopThreshold, "early_stop_threshold must lie in [0, 1]");
  require(temp_advantage > 0.0 && std::isfinite(temp_advantage), ConfigViolation::kTempAdvantage,
          "temp_advantage must be > 0");
  require(temp_alignment > 0.0 && std::isfinite(temp_alignment), ConfigViolation::kTempAlignment,
          "temp_alignment must be > 0");
  require(temp_outer > 0.0 && std::isfinite(temp_outer), ConfigViolation::kTempOuter,
          "temp_outer must be > 0");
  require(width_prune_k >= 1, ConfigViolation::kWidthPruneK, "width_prune_k must be >= 1");
  require(gen_temperature >= 0.0 && std::isfinite(gen_temperature),
          ConfigViolation::kGenTemperature, "gen_temperature must be >= 0");
  require(!token_budget || *token_budget >= 1, ConfigViolation::kTokenBudget,
          "token_budget must be >= 1 when set");
  require(step_max_tokens >= 1 && foresight_max_tokens >= 1 && completion_max_tokens >= 1,
          ConfigViolation::kMaxTokens, "per-call token limits must be >= 1");
  require(advantage_weight >= 0.0 && alignment_weight >= 0.0 &&
              advantage_weight + alignment_weight > 0.0,
          ConfigViolation::kRewardWeights, "reward weights must be >= 0 and not both zero");
  require(!step_delimiter.empty(), ConfigViolation::kStepDelimiter,
          "step_delimiter must be non-empty");
}

void to_json(nlohmann::json& j, const DecodingConfig& c) {
  j = nlohmann::json{
      {"step_beam_size", c.step_beam_size},
      {"rollouts_per_beam", c.rollouts_per_beam},
      {"foresight_min", c.foresight_min},
      {"foresight_max", c.foresight_max},
      {"num_clusters", c.num_clusters},
      {"early_stop_threshold", c.early_stop_threshold},
      {"temp_advantage", c.temp_advantage},
      {"temp_alignment", c.temp_alignment},
      {"temp_outer", c.temp_outer},
      {"width_prune_k", c.width_prune_k},
      {"gen_temperature", c.gen_temperature},
      {"seed", c.seed},
      {"disable_foresight", c.disable_foresight},
      {"disable_cluster", c.disable_cluster},
      {"disable_pruning", c.disable_pruning},
      {"token_budget", c.token_budget ? nlohmann::json(*c.token_budget) : nlohmann::json()},
      {"advantage_weight", c.advantage_weight},
      {"alignment_weight", c.alignment_weight},
      {"step_delimiter", c.step_delimiter},
      {"answer_marker", c.answer_marker},
      {"extract_pattern", c.extract_pattern},
      {"completion_stop", c.completion_stop},
      {"step_max_tokens", c.step_max_tokens},
      {"foresight_max_tokens", c.foresight_max_tokens},
      {"completion_max_tokens", c.completion_max_tokens},
      {"finalize_argmax", c.finalize_argmax},
  };
}

void from_json(const nlohmann::json& j, DecodingConfig& c) {
  if (!j.is_object()) throw ConfigError(ConfigViolation::kMalformed, "config must be an object");
  read_field(j, "step_beam_size", c.step_beam_size);
  read_field(j, "rollouts_per_beam", c.rollouts_per_beam);
  read_field(j, "foresight_min", c.foresight_min);
  read_field(j, "foresight_max", c.foresight_max);
  read_field(j, "num_clusters", c.num_clusters);
  read_field(j, "early_stop_threshold", c.early_stop_threshold);
  read_field(j, "temp_advantage", c.temp_advantage);
  read_field(j, "temp_alignment", c.temp_alignment);
  read_field(j, "temp_outer", c.temp_outer);
  read_field(j, "width_prune_k", c.width_prune_k);
  read_field(j, "gen_temperature", c.gen_temperature);
  read_field(j, "seed", c.seed);
  read_field(j, "disable_foresight", c.disable_foresight);
  read_field(j, "disable_cluster", c.disable_cluster);
  read_field(j, "disable_pruning", c.disable_pruning);
  if (auto it = j.find("token_budget"); it != j.end()) {
    if (it->is_null()) {
      c.token_budget.reset();
    } else {
      std::int64_t b = 0;
      read_field(j, "token_budget", b);
      c.token_budget = b;
    }
  }
  read_field(j, "advantage_weight", c.advantage_weight);
  read_field(j, "alignment_weight", c.alignment_weight);
  read_field(j, "step_delimiter", c.step_delimiter);
  read_field(j, "answer_marker", c.answer_marker);
  read_field(j, "extract_pattern", c.extract_pattern);
  read_field(j, "completion_stop", c.completion_stop);
  read_field(j, "step_max_tokens", c.step_max_tokens);
  read_field(j, "foresight_max_tokens", c.foresight_max_tokens);
  read_field(j, "completion_max_tokens", c.completion_max_tokens);
  read_field(j, "finalize_argmax", c.finalize_argmax);
}

DecodingConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(ConfigViolation::kMalformed, "config file " + path + ": " + e.what());
  }
  DecodingConfig cfg = j.get<DecodingConfig>();
  cfg.validate();
  return cfg;
}

StepSample make_step_sample(std::string text, std::vector<double> token_logprobs,
                            bool is_terminal) {
  if (token_logprobs.empty()) throw DomainError("step sample has no tokens");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) throw DomainError("token log-prob must be finite and <= 0");
    sum += lp;
  }
  StepSample s;
  s.text = std::move(text);
  s.confidence = sum / static_cast<double>(token_logprobs.size());
  s.token_logprobs = std::move(token_logprobs);
  s.is_terminal = is_terminal;
  return s;
}

std::string Beam::text() const {
  std::string out;
  for (const auto& s : steps) out += s.text;
  return out;
}

void Beam::append(StepSample step) {
  total_tokens += static_cast<std::int64_t>(step.token_count());
  finished = finished || step.is_terminal;
  steps.push_back(std::move(step));
}

std::int64_t DecodeTrace::rollout_tokens() const {
  return std::accumulate(steps.begin(), steps.end(), std::int64_t{0},
                         [](std::int64_t a, const TimestepRecord& r) { return a + r.rollout_tokens; });
}

std::int64_t DecodeTrace::foresight_tokens() const {
  return std::accumulate(
      steps.begin(), steps.end(), std::int64_t{0},
      [](std::int64_t a, const TimestepRecord& r) { return a + r.foresight_tokens; });
}

std::int64_t DecodeTrace::reconciled_tokens() const {
  return rollout_tokens() + foresight_tokens() + completion_tokens;
}

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw DomainError("below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

RandomStream RandomStream::fork(std::string_view label) {
  return RandomStream(splitmix64(engine_() ^ fnv1a64(label)));
}

RandomStream seeded_rng(std::uint64_t seed, std::string_view stream_label) {
  return RandomStream(splitmix64(splitmix64(seed) ^ fnv1a64(stream_label)));
}

std::size_t sample_categorical(const std::vector<double>& weights, RandomStream& rng) {
  if (weights.empty()) throw DomainError("categorical over empty weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("categorical weights sum to zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace phi
