#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace phi {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a numeric routine (empty list, non-finite value...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Backend could not be reached. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Backend answered with something unusable. Fatal for the run.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ConfigViolation {
  kStepBeamSize,
  kRolloutsPerBeam,
  kForesightMin,
  kForesightOrder,
  kNumClusters,
  kEarlyStopThreshold,
  kTempAdvantage,
  kTempAlignment,
  kTempOuter,
  kWidthPruneK,
  kGenTemperature,
  kTokenBudget,
  kMaxTokens,
  kRewardWeights,
  kStepDelimiter,
  kMalformed,
};

class ConfigError : public Error {
 public:
  ConfigError(ConfigViolation violation, const std::string& what)
      : Error(what), violation_(violation) {}
  ConfigViolation violation() const noexcept { return violation_; }

 private:
  ConfigViolation violation_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DecodingConfig {
  int step_beam_size = 4;     // M
  int rollouts_per_beam = 4;  // N
  int foresight_min = 4;      // T_min
  int foresight_max = 8;      // T_max
  int num_clusters = 3;       // K
  double early_stop_threshold = 0.7;
  double temp_advantage = 0.6;
  double temp_alignment = 0.6;
  double temp_outer = 1.0;
  int width_prune_k = 1;
  double gen_temperature = 0.6;
  std::uint64_t seed = 0;

  bool disable_foresight = false;
  bool disable_cluster = false;
  bool disable_pruning = false;

  std::optional<std::int64_t> token_budget;

  // Equal weighting of the two normalized terms in R.
  double advantage_weight = 1.0;
  double alignment_weight = 1.0;

  std::string step_delimiter = "\n";
  std::string answer_marker = "The answer is";
  std::string extract_pattern;  // empty: text after the last answer marker
  // Stop sequences for foresight and final completion; empty runs to EOS.
  std::vector<std::string> completion_stop;
  int step_max_tokens = 256;
  int foresight_max_tokens = 1024;
  int completion_max_tokens = 1024;
  bool finalize_argmax = false;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  bool operator==(const DecodingConfig&) const = default;
};

void to_json(nlohmann::json& j, const DecodingConfig& cfg);
/// Absent fields keep their defaults. Does not validate.
void from_json(const nlohmann::json& j, DecodingConfig& cfg);

DecodingConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Domain values
// ---------------------------------------------------------------------------

struct StepSample {
  std::string text;
  std::vector<double> token_logprobs;
  double confidence = 0.0;  // mean of token_logprobs
  bool is_terminal = false;

  std::size_t token_count() const noexcept { return token_logprobs.size(); }
};

/// Builds a sample and checks its invariants (non-empty, every logprob <= 0).
StepSample make_step_sample(std::string text, std::vector<double> token_logprobs,
                            bool is_terminal);

struct Beam {
  std::vector<StepSample> steps;
  double prev_foresight = 0.0;  // F_{t-1}; 0 at the root
  std::int64_t total_tokens = 0;
  bool finished = false;
  double last_reward = 0.0;  // R of the candidate that created this beam

  std::string text() const;
  void append(StepSample step);
};

struct ForesightRecord {
  int parent_beam_index = -1;
  StepSample candidate;
  std::string path_text;  // parent beam text + candidate text
  std::string foresight_text;
  std::vector<double> foresight_logprobs;
  double foresight_score = 0.0;  // F_t
  std::optional<int> cluster_id;
  double advantage = 0.0;
  double alignment = 0.0;
  double norm_advantage = 0.0;
  double norm_alignment = 0.0;
  double reward = 0.0;
  double weight = 1.0;
};

struct ScoredSet {
  std::vector<ForesightRecord> records;
  double advantage_denominator = 0.0;
  double alignment_denominator = 0.0;
};

struct TimestepRecord {
  int t = 0;
  int candidates_before = 0;
  int candidates_after = 0;
  std::vector<int> dropped;
  std::vector<int> cluster_sizes;
  double largest_fraction = 0.0;
  bool early_stop = false;
  std::vector<int> sampled;  // indices into the sampling pool
  std::int64_t rollout_tokens = 0;
  std::int64_t foresight_tokens = 0;
  ScoredSet scored;
};

struct DecodeTrace {
  std::vector<TimestepRecord> steps;
  std::int64_t completion_tokens = 0;
  std::int64_t total_output_tokens = 0;
  double wall_seconds = 0.0;
  std::string final_answer;

  std::int64_t rollout_tokens() const;
  std::int64_t foresight_tokens() const;
  /// Sum over timesteps plus completion; equals total_output_tokens.
  std::int64_t reconciled_tokens() const;
};

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view data) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Portable random stream: mt19937_64 with hand-rolled conversions, so draws
/// are identical across standard library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t state) : engine_(state) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Independent child stream keyed by label.
  RandomStream fork(std::string_view label);

 private:
  std::mt19937_64 engine_;
};

RandomStream seeded_rng(std::uint64_t seed, std::string_view stream_label);

/// Draw an index from unnormalized non-negative weights.
std::size_t sample_categorical(const std::vector<double>& weights, RandomStream& rng);

}  // namespace phi
