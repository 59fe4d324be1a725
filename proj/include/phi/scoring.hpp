#pragma once

#include <span>
#include <vector>

#include "phi/core.hpp"
#include "phi/lm_backend.hpp"

namespace phi {

/// F_t: mean log-prob over the candidate tokens followed by its foresight tokens.
double foresight_probability(const StepSample& candidate, const GenerationResult& foresight);
double foresight_probability(std::span<const double> candidate_logprobs,
                             std::span<const double> foresight_logprobs);

/// A_t = F_t - F_{t-1} of the parent beam.
double advantage(double foresight_now, double foresight_prev);

/// C_t = |cluster| / total paths.
double alignment(int cluster_id, std::span<const int> cluster_sizes, int total_paths);

/// exp(v_i / tau) / sum_j exp(v_j / tau), max-subtracted.
std::vector<double> softmax_norm(std::span<const double> values, double temperature);

double joint_reward(double norm_advantage, double norm_alignment, bool use_alignment = true,
                    double advantage_weight = 1.0, double alignment_weight = 1.0);

/// Sequential categorical draws without replacement, renormalizing after each
/// removal. Returns min(count, |weights|) distinct indices in draw order.
std::vector<int> sample_without_replacement(std::span<const double> weights, int count,
                                            RandomStream& rng);

struct ScoreOptions {
  double temp_advantage = 0.6;
  double temp_alignment = 0.6;
  double temp_outer = 1.0;
  bool use_alignment = true;
  double advantage_weight = 1.0;
  double alignment_weight = 1.0;
};

/// Fills advantage/alignment normalizations, R and the selection weight
/// w = exp(R / temp_outer) for every record. Records must already carry
/// foresight_score, advantage and alignment.
void score_records(ScoredSet& set, const ScoreOptions& opts);

/// Sampling weights when foresight is ablated: softmax over step confidences
/// at temp_outer. Stored as R (sums to 1) and w = the same softmax mass.
void score_by_confidence(ScoredSet& set, double temp_outer);

}  // namespace phi
