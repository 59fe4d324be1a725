#include "phi/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "phi/synthetic_lm.hpp"

namespace phi {

double flops(std::int64_t output_tokens, double model_params) {
  if (output_tokens < 0 || model_params < 0.0) throw DomainError("flops: negative input");
  return 6.0 * static_cast<double>(output_tokens) * model_params;
}

FlopsReport flops_report(const DecodeTrace& trace, double model_params) {
  FlopsReport r;
  r.rollout_tokens = trace.rollout_tokens();
  r.foresight_tokens = trace.foresight_tokens();
  r.completion_tokens = trace.completion_tokens;
  r.total_output_tokens = r.rollout_tokens + r.foresight_tokens + r.completion_tokens;
  r.model_params = model_params;
  r.flops = flops(r.total_output_tokens, model_params);
  return r;
}

double step_value_accuracy(std::span<const double> estimated, std::span<const double> outcome) {
  if (estimated.size() != outcome.size()) throw DomainError("step_value_accuracy: length mismatch");
  if (estimated.empty()) throw DomainError("step_value_accuracy of empty distributions");
  double sq = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double d = estimated[i] - outcome[i];
    sq += d * d;
  }
  return 1.0 - sq / static_cast<double>(estimated.size());
}

double mean_step_value_accuracy(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& per_step) {
  if (per_step.empty()) throw DomainError("mean_step_value_accuracy over no timesteps");
  double total = 0.0;
  for (const auto& [p1, p2] : per_step) total += step_value_accuracy(p1, p2);
  return total / static_cast<double>(per_step.size());
}

std::vector<double> estimated_step_values(const ScoredSet& set) {
  std::vector<double> out;
  double total = 0.0;
  for (const auto& r : set.records) {
    out.push_back(r.reward);
    total += r.reward;
  }
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

std::vector<double> binary_step_values(std::size_t candidates, std::span<const int> selected) {
  std::vector<double> out(candidates, 0.0);
  for (int s : selected) {
    if (s >= 0 && static_cast<std::size_t>(s) < candidates) out[static_cast<std::size_t>(s)] = 1.0;
  }
  return out;
}

std::vector<double> outcome_distribution(std::span<const double> success) {
  std::vector<double> out(success.begin(), success.end());
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0.0) {
    for (double& v : out) v /= total;
  } else if (!out.empty()) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

double synthetic_step_value_accuracy(const DecodeTrace& trace, const SyntheticLM& lm,
                                     const std::string& task_prompt, double temperature) {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> per_step;
  for (const auto& step : trace.steps) {
    if (step.scored.records.empty()) continue;
    std::vector<double> success;
    for (const auto& r : step.scored.records) {
      success.push_back(lm.success_probability(task_prompt + r.path_text, temperature));
    }
    per_step.emplace_back(estimated_step_values(step.scored), outcome_distribution(success));
  }
  return mean_step_value_accuracy(per_step);
}

namespace {

std::optional<double> parse_decimal(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string normalize_answer(const std::string& answer) {
  std::string out;
  bool space = false;
  for (unsigned char c : answer) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!out.empty() && out.back() == '.') out.pop_back();
  // Numeric forms: drop currency sign and thousands separators.
  std::string numeric;
  for (char c : out) {
    if (c != '$' && c != ',') numeric.push_back(c);
  }
  if (parse_decimal(numeric)) return numeric;
  return out;
}

bool answers_match(const std::string& predicted, const std::string& gold) {
  const std::string a = normalize_answer(predicted);
  const std::string b = normalize_answer(gold);
  const auto x = parse_decimal(a);
  const auto y = parse_decimal(b);
  if (x && y) return std::abs(*x - *y) <= 1e-6;
  return a == b;
}

double pass_at_1(std::span<const std::optional<std::string>> predicted,
                 std::span<const std::string> gold) {
  if (predicted.size() != gold.size()) throw DomainError("pass_at_1: length mismatch");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] && answers_match(*predicted[i], gold[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double pass_at_1(std::span<const DecodeResult> results, std::span<const std::string> gold) {
  std::vector<std::optional<std::string>> predicted;
  predicted.reserve(results.size());
  for (const auto& r : results) predicted.push_back(r.extracted_answer);
  return pass_at_1(predicted, gold);
}

void emit_record(std::ostream& out, const nlohmann::json& record) { out << record.dump() << '\n'; }

void print_summary_table(std::ostream& out, const std::vector<SummaryRow>& rows) {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  out << std::left << std::setw(static_cast<int>(width)) << "Method" << "  " << std::right
      << std::setw(8) << "Pass@1" << "  " << std::setw(10) << "FLOPS" << "  " << std::setw(8)
      << "Delta" << '\n';
  out << std::string(width + 34, '-') << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.label << "  " << std::right
        << std::fixed << std::setprecision(2) << std::setw(8) << 100.0 * r.pass_at_1 << "  "
        << std::scientific << std::setprecision(2) << std::setw(10) << r.avg_flops << "  ";
    if (r.delta_accuracy) {
      out << std::fixed << std::setprecision(2) << std::showpos << std::setw(8)
          << 100.0 * *r.delta_accuracy << std::noshowpos;
    } else {
      out << std::setw(8) << "-";
    }
    out << '\n';
  }
  out << std::defaultfloat;
}

}  // namespace phi
