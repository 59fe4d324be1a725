#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phi/core.hpp"
#include "phi/decoder.hpp"
#include "phi/lm_backend.hpp"

namespace phi {

class DatasetError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

struct TaskRecord {
  std::string id;
  std::string prompt;
  std::string gold_answer;
  std::optional<std::string> prefix;
  std::optional<std::string> extract;

  /// Few-shot prefix (if any) followed by the prompt.
  std::string full_prompt() const { return prefix.value_or("") + prompt; }
};

struct DatasetDiagnostic {
  int line = 0;  // 1-based
  std::string message;
};

struct Dataset {
  std::vector<TaskRecord> records;
  std::vector<DatasetDiagnostic> diagnostics;
};

/// JSONL with {"id", "prompt", "answer", optional "prefix", optional "extract"}.
/// Malformed lines and duplicate ids become diagnostics; blank lines are skipped.
Dataset load_dataset(const std::string& path);

void write_dataset(const std::string& path, const std::vector<TaskRecord>& records);

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::string& path);

enum class Strategy { kPhi, kAutoregressive, kNoForesight, kNoCluster, kNoPruning };

const char* to_string(Strategy s) noexcept;
Strategy parse_strategy(const std::string& name);

DecodeResult decode_with(Strategy s, const std::string& prompt, const DecodingConfig& cfg,
                         LanguageModel& lm);

/// Per-task seed: the run seed xor a hash of the task id.
std::uint64_t task_seed(std::uint64_t run_seed, const std::string& task_id) noexcept;

struct TaskSummary {
  std::string id;
  std::optional<std::string> answer;
  std::string gold;
  bool correct = false;
  std::int64_t rollout_tokens = 0;
  std::int64_t foresight_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t output_tokens = 0;
  double flops = 0.0;
  int timesteps = 0;
  std::string stop_reason;
  std::optional<std::string> error;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const TaskSummary& s);
void from_json(const nlohmann::json& j, TaskSummary& s);

struct RunManifest {
  DecodingConfig config;
  std::string strategy;
  std::string backend;
  std::string dataset_path;
  std::string dataset_hash;
  double model_params = 0.0;
  std::vector<TaskSummary> tasks;
  double pass_at_1 = 0.0;
  double avg_flops = 0.0;
  int errors = 0;
  double wall_seconds = 0.0;

  /// SHA-256 over the manifest with all wall-clock fields removed.
  std::string content_hash() const;
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
};

struct RunOptions {
  Strategy strategy = Strategy::kPhi;
  int workers = 1;
  double model_params = 8e9;
  /// Append-only per-task JSONL. Ids already present without an error are
  /// not decoded again.
  std::optional<std::string> results_path;
  std::ostream* log = nullptr;
};

RunManifest run(const std::string& dataset_path, const DecodingConfig& cfg, LanguageModel& lm,
                const RunOptions& opts);

/// Fills pass@1, average FLOPS and the error count from the task summaries.
void aggregate(RunManifest& m);

struct ComparisonRow {
  std::string label;
  double pass_at_1 = 0.0;
  double avg_flops = 0.0;
  double delta_accuracy = 0.0;
  double delta_flops = 0.0;
};

struct ComparisonReport {
  std::string dataset_hash;
  std::string baseline;
  std::vector<ComparisonRow> rows;
};

/// Deltas are taken against the autoregressive manifest when present,
/// otherwise against the first one.
ComparisonReport compare(const std::vector<RunManifest>& manifests);

void print_comparison(std::ostream& out, const ComparisonReport& report);

/// One-row table in the main results layout.
void print_run_summary(std::ostream& out, const RunManifest& m);

}  // namespace phi
