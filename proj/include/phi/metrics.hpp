#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "phi/decoder.hpp"

namespace phi {

class SyntheticLM;

/// 6 * n * P.
double flops(std::int64_t output_tokens, double model_params);

struct FlopsReport {
  std::int64_t total_output_tokens = 0;
  double model_params = 0.0;
  double flops = 0.0;
  std::int64_t rollout_tokens = 0;
  std::int64_t foresight_tokens = 0;
  std::int64_t completion_tokens = 0;
};

FlopsReport flops_report(const DecodeTrace& trace, double model_params);

/// 1 - sum_i (p1_i - p2_i)^2 / |P1|.
double step_value_accuracy(std::span<const double> estimated, std::span<const double> outcome);

/// Mean of step_value_accuracy over per-timestep pairs.
double mean_step_value_accuracy(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& per_step);

/// P1 for one timestep: the R values normalized to sum to one.
std::vector<double> estimated_step_values(const ScoredSet& set);

/// P1 for methods without scores: 1 for the selected candidates, 0 otherwise.
std::vector<double> binary_step_values(std::size_t candidates, std::span<const int> selected);

/// P2 for one timestep: each candidate's chance of reaching the correct
/// answer, normalized to a distribution (uniform when every chance is zero).
std::vector<double> outcome_distribution(std::span<const double> success);

/// Step-value accuracy of a whole synthetic decode: P2 comes from the exact
/// success probability of each candidate's path at `temperature`.
double synthetic_step_value_accuracy(const DecodeTrace& trace, const SyntheticLM& lm,
                                     const std::string& task_prompt, double temperature);

/// Case and whitespace folding, trailing '.' and '$' / ',' in numbers removed.
std::string normalize_answer(const std::string& answer);

/// Numeric comparison within 1e-6 when both parse as decimals, else string equality.
bool answers_match(const std::string& predicted, const std::string& gold);

double pass_at_1(std::span<const std::optional<std::string>> predicted,
                 std::span<const std::string> gold);
double pass_at_1(std::span<const DecodeResult> results, std::span<const std::string> gold);

struct SummaryRow {
  std::string label;
  double pass_at_1 = 0.0;
  double avg_flops = 0.0;
  std::optional<double> delta_accuracy;  // vs the baseline row
};

/// One JSON object per line.
void emit_record(std::ostream& out, const nlohmann::json& record);

/// Fixed-width table: method, Pass@1 (%), avg FLOPS, delta.
void print_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace phi
