#include "phi/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace phi {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(what);
}

}  // namespace

double foresight_probability(std::span<const double> candidate_logprobs,
                             std::span<const double> foresight_logprobs) {
  const std::size_t n = candidate_logprobs.size() + foresight_logprobs.size();
  if (n == 0) throw DomainError("foresight_probability of an empty path");
  double sum = 0.0;
  for (double v : candidate_logprobs) sum += v;
  for (double v : foresight_logprobs) sum += v;
  return sum / static_cast<double>(n);
}

double foresight_probability(const StepSample& candidate, const GenerationResult& foresight) {
  return foresight_probability(candidate.token_logprobs, foresight.token_logprobs);
}

double advantage(double foresight_now, double foresight_prev) {
  require_finite(foresight_now, "advantage: non-finite F_t");
  require_finite(foresight_prev, "advantage: non-finite F_{t-1}");
  return foresight_now - foresight_prev;
}

double alignment(int cluster_id, std::span<const int> cluster_sizes, int total_paths) {
  if (total_paths <= 0) throw DomainError("alignment over zero foresight paths");
  if (cluster_id < 0 || static_cast<std::size_t>(cluster_id) >= cluster_sizes.size()) {
    throw DomainError("alignment: cluster id out of range");
  }
  return static_cast<double>(cluster_sizes[static_cast<std::size_t>(cluster_id)]) /
         static_cast<double>(total_paths);
}

std::vector<double> softmax_norm(std::span<const double> values, double temperature) {
  if (values.empty()) throw DomainError("softmax of an empty list");
  if (!(temperature > 0.0)) throw DomainError("softmax temperature must be > 0");
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    require_finite(v, "softmax: non-finite value");
    max_v = std::max(max_v, v);
  }
  std::vector<double> out(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - max_v) / temperature);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double joint_reward(double norm_advantage, double norm_alignment, bool use_alignment,
                    double advantage_weight, double alignment_weight) {
  if (!use_alignment) return norm_advantage;
  return advantage_weight * norm_advantage + alignment_weight * norm_alignment;
}

std::vector<int> sample_without_replacement(std::span<const double> weights, int count,
                                            RandomStream& rng) {
  if (weights.empty()) throw DomainError("sample_without_replacement over no items");
  if (count < 1) throw DomainError("sample_without_replacement count must be >= 1");
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("sampling weights must be finite and > 0");
  }
  std::vector<double> remaining(weights.begin(), weights.end());
  const int draws = std::min<int>(count, static_cast<int>(weights.size()));
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(draws));
  for (int d = 0; d < draws; ++d) {
    const auto i = sample_categorical(remaining, rng);
    picked.push_back(static_cast<int>(i));
    remaining[i] = 0.0;
  }
  return picked;
}

void score_records(ScoredSet& set, const ScoreOptions& opts) {
  auto& recs = set.records;
  if (recs.empty()) return;
  std::vector<double> adv(recs.size()), align(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    adv[i] = recs[i].advantage;
    align[i] = recs[i].alignment;
  }
  const auto norm_a = softmax_norm(adv, opts.temp_advantage);
  const auto norm_c = softmax_norm(align, opts.temp_alignment);

  const double max_a = *std::max_element(adv.begin(), adv.end());
  const double max_c = *std::max_element(align.begin(), align.end());
  set.advantage_denominator = 0.0;
  set.alignment_denominator = 0.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    set.advantage_denominator += std::exp((adv[i] - max_a) / opts.temp_advantage);
    set.alignment_denominator += std::exp((align[i] - max_c) / opts.temp_alignment);
  }

  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto& r = recs[i];
    r.norm_advantage = norm_a[i];
    r.norm_alignment = opts.use_alignment ? norm_c[i] : 0.0;
    r.reward = joint_reward(norm_a[i], norm_c[i], opts.use_alignment, opts.advantage_weight,
                            opts.alignment_weight);
    r.weight = std::exp(r.reward / opts.temp_outer);
  }
}

void score_by_confidence(ScoredSet& set, double temp_outer) {
  auto& recs = set.records;
  if (recs.empty()) return;
  std::vector<double> conf(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) conf[i] = recs[i].candidate.confidence;
  const auto p = softmax_norm(conf, temp_outer);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].norm_advantage = 0.0;
    recs[i].norm_alignment = 0.0;
    recs[i].reward = p[i];
    recs[i].weight = std::max(p[i], std::numeric_limits<double>::min());
  }
}

}  // namespace phi
