#include "phi/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <regex>

#include "phi/clustering.hpp"
#include "phi/pruning.hpp"
#include "phi/scoring.hpp"

namespace phi {

const char* to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::kEarlyStop:
      return "early_stop";
    case StopReason::kTMaxReached:
      return "T_max_reached";
    case StopReason::kAllBeamsFinished:
      return "all_beams_finished";
    case StopReason::kTokenBudget:
      return "token_budget";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

// Runs fn(0..n-1) across OpenMP threads; the first exception is rethrown
// after the join.
template <typename Fn>
void fan_out(std::size_t n, Fn&& fn) {
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(phi_fan_out)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

struct Candidate {
  int parent = 0;
  StepSample step;
};

class TokenMeter {
 public:
  explicit TokenMeter(const std::optional<std::int64_t>& budget) : budget_(budget) {}
  void add(std::int64_t n) { used_ += n; }
  bool exhausted() const { return budget_ && used_ >= *budget_; }
  /// Per-call cap so that `calls` requests of `samples` each cannot overrun.
  int cap(int wanted, std::size_t calls, int samples) const {
    if (!budget_) return wanted;
    const std::int64_t left = *budget_ - used_;
    const auto per = left / static_cast<std::int64_t>(std::max<std::size_t>(calls, 1) * samples);
    return static_cast<int>(std::min<std::int64_t>(wanted, per));
  }

 private:
  std::optional<std::int64_t> budget_;
  std::int64_t used_ = 0;
};

double beam_weight(const Beam& b, const DecodingConfig& cfg) {
  if (cfg.disable_foresight) return std::max(b.last_reward, std::numeric_limits<double>::min());
  return std::exp(b.last_reward / cfg.temp_outer);
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

DecodeResult finish(DecodeResult r, const DecodingConfig& cfg, Clock::time_point start) {
  r.extracted_answer = extract_answer(r.final_text, cfg.answer_marker, cfg.extract_pattern);
  r.trace.final_answer = r.extracted_answer.value_or("");
  r.trace.total_output_tokens = r.trace.reconciled_tokens();
  r.trace.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& text, const std::string& marker,
                                          const std::string& pattern) {
  if (!pattern.empty()) {
    const std::regex re(pattern, std::regex::ECMAScript);
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      last = m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
    }
    if (last) last = trim(*last);
    return last && !last->empty() ? last : std::nullopt;
  }
  if (marker.empty()) return std::nullopt;
  const auto pos = text.rfind(marker);
  if (pos == std::string::npos) return std::nullopt;
  std::string rest = text.substr(pos + marker.size());
  if (const auto nl = rest.find('\n'); nl != std::string::npos) rest.resize(nl);
  rest = trim(rest);
  if (!rest.empty() && rest.front() == ':') rest = trim(rest.substr(1));
  while (!rest.empty() && rest.back() == '.') rest.pop_back();
  rest = trim(rest);
  if (rest.empty()) return std::nullopt;
  return rest;
}

DecodeResult phi_decode(const std::string& task_prompt, const DecodingConfig& cfg,
                        LanguageModel& lm) {
  cfg.validate();
  const auto start = Clock::now();
  const auto m_beams = static_cast<std::size_t>(cfg.step_beam_size);
  const int n_rollouts = cfg.rollouts_per_beam;
  const bool clustering = !cfg.disable_cluster && !cfg.disable_foresight;
  const bool pruning = !cfg.disable_pruning;

  RandomStream select_rng = seeded_rng(cfg.seed, "sampling");
  RandomStream cluster_rng = seeded_rng(cfg.seed, "kmeans");
  RandomStream request_rng = seeded_rng(cfg.seed, "requests");

  DecodeResult result;
  DecodeTrace& trace = result.trace;
  TokenMeter meter(cfg.token_budget);
  std::vector<Beam> beams(m_beams);
  StopReason reason = StopReason::kTMaxReached;
  bool budget_hit = false;

  try {
    for (int t = 1; t <= cfg.foresight_max; ++t) {
      std::vector<std::size_t> live;
      for (std::size_t b = 0; b < beams.size(); ++b) {
        if (!beams[b].finished) live.push_back(b);
      }
      if (live.empty()) {
        reason = StopReason::kAllBeamsFinished;
        break;
      }

      TimestepRecord rec;
      rec.t = t;

      // Step rollout.
      StepOptions step_opts{cfg.step_delimiter, cfg.answer_marker,
                            meter.cap(cfg.step_max_tokens, live.size(), n_rollouts),
                            cfg.gen_temperature};
      if (meter.exhausted() || step_opts.max_tokens < 1) {
        budget_hit = true;
        break;
      }
      std::vector<std::string> contexts(live.size());
      std::vector<std::uint64_t> seeds(live.size());
      for (std::size_t i = 0; i < live.size(); ++i) {
        contexts[i] = task_prompt + beams[live[i]].text();
        seeds[i] = request_rng.next_u64();
      }
      std::vector<std::vector<StepSample>> rolled(live.size());
      fan_out(live.size(), [&](std::size_t i) {
        rolled[i] = rollout_step(lm, contexts[i], n_rollouts, step_opts, seeds[i]);
      });
      std::vector<Candidate> cands;
      std::vector<std::string> cand_context;
      for (std::size_t i = 0; i < live.size(); ++i) {
        for (auto& s : rolled[i]) {
          rec.rollout_tokens += static_cast<std::int64_t>(s.token_count());
          cand_context.push_back(contexts[i]);
          cands.push_back({static_cast<int>(live[i]), std::move(s)});
        }
      }
      meter.add(rec.rollout_tokens);
      rec.candidates_before = static_cast<int>(cands.size());

      // In-width pruning over the joint pool.
      std::vector<int> kept;
      if (pruning) {
        std::vector<double> conf(cands.size());
        for (std::size_t i = 0; i < cands.size(); ++i) conf[i] = cands[i].step.confidence;
        auto rep = inwidth_filter(conf, cfg.width_prune_k);
        kept = std::move(rep.kept);
        rec.dropped = std::move(rep.dropped);
      } else {
        kept.resize(cands.size());
        for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = static_cast<int>(i);
      }
      rec.candidates_after = static_cast<int>(kept.size());

      // Foresight.
      std::vector<GenerationResult> futures(kept.size());
      if (!cfg.disable_foresight) {
        const int fs_cap = meter.cap(cfg.foresight_max_tokens, kept.size(), 1);
        if (fs_cap < 1) {
          budget_hit = true;
          trace.steps.push_back(std::move(rec));
          break;
        }
        std::vector<std::uint64_t> fs_seeds(kept.size());
        for (auto& s : fs_seeds) s = request_rng.next_u64();
        fan_out(kept.size(), [&](std::size_t i) {
          const auto& c = cands[static_cast<std::size_t>(kept[i])];
          futures[i] = foresight(lm, cand_context[static_cast<std::size_t>(kept[i])] + c.step.text,
                                 c.step, fs_cap, cfg.gen_temperature, fs_seeds[i],
                                 cfg.completion_stop);
        });
        for (const auto& f : futures) rec.foresight_tokens += static_cast<std::int64_t>(f.token_count());
        meter.add(rec.foresight_tokens);
      }

      // Step value estimation.
      ScoredSet& set = rec.scored;
      set.records.resize(kept.size());
      std::vector<std::string> paths(kept.size());
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& c = cands[static_cast<std::size_t>(kept[i])];
        auto& r = set.records[i];
        r.parent_beam_index = c.parent;
        r.candidate = c.step;
        r.path_text = beams[static_cast<std::size_t>(c.parent)].text() + c.step.text;
        r.foresight_text = futures[i].text;
        r.foresight_logprobs = futures[i].token_logprobs;
        r.foresight_score = foresight_probability(c.step, futures[i]);
        r.advantage = advantage(r.foresight_score, beams[static_cast<std::size_t>(c.parent)].prev_foresight);
        paths[i] = c.step.text + futures[i].text;
      }
      std::optional<ClusterAssignment> clusters;
      if (clustering) {
        clusters = cluster_texts(paths, cfg.num_clusters, cluster_rng);
        const auto frac = cluster_fractions(*clusters);
        for (std::size_t i = 0; i < kept.size(); ++i) {
          set.records[i].cluster_id = clusters->labels[i];
          set.records[i].alignment = frac[i];
        }
        rec.cluster_sizes = clusters->sizes;
        rec.largest_fraction = clusters->largest_fraction;
      }
      if (cfg.disable_foresight) {
        score_by_confidence(set, cfg.temp_outer);
      } else {
        score_records(set, {cfg.temp_advantage, cfg.temp_alignment, cfg.temp_outer, clustering,
                            cfg.advantage_weight, cfg.alignment_weight});
      }

      // Sample M beams from the survivors plus finished beams.
      std::vector<double> weights;
      for (const auto& r : set.records) weights.push_back(r.weight);
      std::vector<std::size_t> frozen;
      for (std::size_t b = 0; b < beams.size(); ++b) {
        if (beams[b].finished) {
          frozen.push_back(b);
          weights.push_back(beam_weight(beams[b], cfg));
        }
      }
      auto picks = sample_without_replacement(weights, static_cast<int>(m_beams), select_rng);
      if (picks.size() < m_beams) {
        const int top = static_cast<int>(std::max_element(weights.begin(), weights.end()) - weights.begin());
        picks.resize(m_beams, top);
      }
      rec.sampled = picks;

      std::vector<Beam> next;
      next.reserve(m_beams);
      for (int p : picks) {
        const auto pi = static_cast<std::size_t>(p);
        if (pi < set.records.size()) {
          const auto& r = set.records[pi];
          Beam b = beams[static_cast<std::size_t>(r.parent_beam_index)];
          b.append(r.candidate);
          b.prev_foresight = r.foresight_score;
          b.last_reward = r.reward;
          next.push_back(std::move(b));
        } else {
          next.push_back(beams[frozen[pi - set.records.size()]]);
        }
      }
      beams = std::move(next);

      // In-depth pruning.
      rec.early_stop = pruning && clusters &&
                       should_early_stop(*clusters, cfg.early_stop_threshold, t, cfg.foresight_min);
      const bool stop_now = rec.early_stop;
      trace.steps.push_back(std::move(rec));
      if (stop_now) {
        reason = StopReason::kEarlyStop;
        break;
      }
      if (meter.exhausted()) {
        budget_hit = true;
        break;
      }
    }
    if (budget_hit) {
      reason = StopReason::kTokenBudget;
    } else if (reason == StopReason::kTMaxReached &&
               std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.finished; })) {
      reason = StopReason::kAllBeamsFinished;
    }

    // Complete the surviving beams, then pick one.
    std::vector<std::string> tails(beams.size());
    if (!budget_hit) {
      std::vector<std::size_t> open;
      for (std::size_t b = 0; b < beams.size(); ++b) {
        if (!beams[b].finished) open.push_back(b);
      }
      const int cap = meter.cap(cfg.completion_max_tokens, open.size(), 1);
      if (!open.empty() && cap >= 1) {
        std::vector<std::uint64_t> c_seeds(open.size());
        for (auto& s : c_seeds) s = request_rng.next_u64();
        std::vector<GenerationResult> done(open.size());
        fan_out(open.size(), [&](std::size_t i) {
          done[i] = complete(lm, task_prompt + beams[open[i]].text(), cap, cfg.gen_temperature,
                             c_seeds[i], cfg.completion_stop);
        });
        for (std::size_t i = 0; i < open.size(); ++i) {
          trace.completion_tokens += static_cast<std::int64_t>(done[i].token_count());
          tails[open[i]] = std::move(done[i].text);
        }
        meter.add(trace.completion_tokens);
      }
    }

    std::vector<double> final_w(beams.size());
    for (std::size_t b = 0; b < beams.size(); ++b) final_w[b] = beam_weight(beams[b], cfg);
    const std::size_t chosen =
        cfg.finalize_argmax
            ? static_cast<std::size_t>(std::max_element(final_w.begin(), final_w.end()) - final_w.begin())
            : sample_categorical(final_w, select_rng);
    result.final_text = beams[chosen].text() + tails[chosen];
    result.stop_reason = reason;
  } catch (const DecodeError&) {
    throw;
  } catch (const Error& e) {
    trace.total_output_tokens = trace.reconciled_tokens();
    throw DecodeError(e.what(), trace, dynamic_cast<const TransportError*>(&e) != nullptr);
  }
  return finish(std::move(result), cfg, start);
}

DecodeResult autoregressive_decode(const std::string& task_prompt, const DecodingConfig& cfg,
                                   LanguageModel& lm) {
  cfg.validate();
  const auto start = Clock::now();
  RandomStream request_rng = seeded_rng(cfg.seed, "requests");
  DecodeResult result;
  int cap = cfg.completion_max_tokens;
  if (cfg.token_budget) cap = static_cast<int>(std::min<std::int64_t>(cap, *cfg.token_budget));
  try {
    auto r = complete(lm, task_prompt, cap, cfg.gen_temperature, request_rng.next_u64(),
                      cfg.completion_stop);
    result.trace.completion_tokens = static_cast<std::int64_t>(r.token_count());
    result.final_text = std::move(r.text);
    result.stop_reason = r.finish_reason == FinishReason::kLength
                             ? (cfg.token_budget && cap == *cfg.token_budget ? StopReason::kTokenBudget
                                                                             : StopReason::kTMaxReached)
                             : StopReason::kAllBeamsFinished;
  } catch (const Error& e) {
    throw DecodeError(e.what(), result.trace, dynamic_cast<const TransportError*>(&e) != nullptr);
  }
  return finish(std::move(result), cfg, start);
}

DecodeResult run_ablation(Ablation variant, const std::string& task_prompt, DecodingConfig cfg,
                          LanguageModel& lm) {
  switch (variant) {
    case Ablation::kNoForesight:
      cfg.disable_foresight = true;
      break;
    case Ablation::kNoCluster:
      cfg.disable_cluster = true;
      break;
    case Ablation::kNoPruning:
      cfg.disable_pruning = true;
      break;
  }
  return phi_decode(task_prompt, cfg, lm);
}

}  // namespace phi
