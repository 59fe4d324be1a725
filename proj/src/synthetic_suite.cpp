#include "phi/synthetic_suite.hpp"

#include <algorithm>
#include <set>

namespace phi {

SpecBuilder::SpecBuilder(std::string prompt, std::string correct_answer) {
  spec_.prompt = std::move(prompt);
  spec_.correct_answer = std::move(correct_answer);
  root_ = fresh();
  spec_.start = root_;
}

std::string SpecBuilder::fresh() { return "s" + std::to_string(next_id_++); }

std::string SpecBuilder::step(const std::string& from, const std::vector<std::string>& tokens,
                              double prob) {
  if (tokens.empty()) throw SpecError("a step needs at least one token");
  std::string state = from;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string next = fresh();
    spec_.transitions[state].push_back({tokens[i], i == 0 ? prob : 1.0, next});
    state = next;
  }
  return state;
}

void SpecBuilder::answer(const std::string& from, const std::vector<std::string>& tokens,
                         double prob, const std::string& label) {
  const std::string end = step(from, tokens, prob);
  spec_.terminals[end] = label;
}

SyntheticLMSpec SpecBuilder::build() && {
  std::set<std::string> vocab;
  int depth = 0;
  for (const auto& [state, trs] : spec_.transitions) {
    for (const auto& tr : trs) vocab.insert(tr.token);
  }
  for (const auto& t : enumerate_trajectories(spec_)) depth = std::max<int>(depth, static_cast<int>(t.tokens.size()));
  spec_.vocabulary.assign(vocab.begin(), vocab.end());
  spec_.max_depth = std::max(depth, 1);
  spec_.validate();
  return std::move(spec_);
}

namespace {

int draw(RandomStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

double draw(RandomStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

std::string num(int v) { return std::to_string(v); }

// Distinct wrong answers, none equal to `correct`.
std::vector<int> wrong_answers(RandomStream& rng, int correct, std::size_t count) {
  std::set<int> out;
  while (out.size() < count) {
    const int w = correct + draw(rng, -40, 40);
    if (w != correct && w > 0) out.insert(w);
  }
  std::vector<int> v(out.begin(), out.end());
  // Decorrelate order from magnitude.
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return v;
}

// Certain steps ending in the answer line.
void certain_tail(SpecBuilder& sb, std::string state, const std::vector<std::vector<std::string>>& steps,
                  const std::string& answer) {
  for (const auto& s : steps) state = sb.step(state, s, 1.0);
  state = sb.step(state, {"Units", " are", " consistent.\n"}, 1.0);
  state = sb.step(state, {"Nothing", " is", " left", " over.\n"}, 1.0);
  state = sb.step(state, {"Write", " it", " down.\n"}, 1.0);
  sb.answer(state, {"The answer is", " " + answer + ".\n"}, 1.0, answer);
}

SyntheticLMSpec myopic_trap(int index, RandomStream& rng) {
  const int a = draw(rng, 3, 19);
  const int b = draw(rng, 3, 19);
  const int c = a * b;
  const auto wrong = wrong_answers(rng, c, 5);
  const std::string A = num(a), B = num(b), C = num(c);

  SpecBuilder sb("Problem " + num(index) + ": what is " + A + " multiplied by " + B + "?\n", C);
  const double p_correct = draw(rng, 0.5, 0.6);
  const double p_junk = 0.05;
  const double p_trap = 1.0 - p_correct - p_junk;

  // The correct opening is one uncertain token; the trap spreads its mass
  // over certain tokens and so has the higher step confidence.
  const auto good = sb.step(sb.root(), {"Multiply " + A + " by " + B + ".\n"}, p_correct);
  const auto trap = sb.step(sb.root(), {"Add", " " + A, " and", " " + B + ".\n"}, p_trap);
  const auto junk = sb.step(sb.root(), {"Guess.\n"}, p_junk);

  certain_tail(sb, good,
               {{A + " times " + B, " is " + C + ".\n"}, {"Check:", " " + C + " / " + A, " = " + B + ".\n"}}, C);

  const std::vector<std::string> words{"Sum", "Total", "Combined", "Together"};
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string w = num(wrong[i]);
    const auto s = sb.step(trap, {words[i] + " gives " + w + ".\n"}, 1.0 / static_cast<double>(words.size()));
    certain_tail(sb, s, {{"Check:", " " + w + " - " + A, " = " + B + ".\n"}}, w);
  }
  certain_tail(sb, junk, {{"Maybe", " " + num(wrong[4]) + ".\n"}, {"Fine.\n"}}, num(wrong[4]));
  return std::move(sb).build();
}

SyntheticLMSpec confident_outlier(int index, RandomStream& rng) {
  const int a = draw(rng, 3, 19);
  const int b = draw(rng, 3, 19);
  const int c = a * b;
  const auto wrong = wrong_answers(rng, c, 2);
  const std::string A = num(a), B = num(b), C = num(c);

  SpecBuilder sb("Problem " + num(index) + ": compute " + A + " times " + B + ".\n", C);
  const double p_correct = draw(rng, 0.55, 0.65);
  const double p_wrong = (1.0 - p_correct) / 2.0;

  // The correct branch hesitates between two phrasings of the same
  // computation; each wrong one is a long, fully certain recital.
  const auto good = sb.step(sb.root(), {"Multiply " + A + " by " + B + ".\n"}, p_correct);
  const auto g1 = sb.step(good, {A + " times " + B + " is " + C + ".\n"}, 0.5);
  const auto g2 = sb.step(good, {A + " times " + B + " gives " + C + ".\n"}, 0.5);
  certain_tail(sb, g1, {{"Check:", " " + C + " / " + A, " = " + B + ".\n"}}, C);
  certain_tail(sb, g2, {{"Check:", " " + C + " / " + A, " = " + B + ".\n"}}, C);

  const std::string w1 = num(wrong[0]);
  const auto r1 = sb.step(sb.root(), {"Recall", " the", " table", " entry", " for", " " + A, " and", " " + B + ".\n"},
                          p_wrong);
  certain_tail(sb, r1,
               {{"From", " memory", " it", " is", " " + w1 + ".\n"},
                {"No", " further", " work", " is", " needed.\n"}},
               w1);
  const std::string w2 = num(wrong[1]);
  const auto r2 = sb.step(sb.root(), {"Estimate", " roughly", " using", " round", " numbers", " near", " " + A + ".\n"},
                          p_wrong);
  certain_tail(sb, r2,
               {{"An", " estimate", " close", " to", " " + w2 + ".\n"},
                {"Good", " enough", " for", " now.\n"}},
               w2);
  return std::move(sb).build();
}

}  // namespace

SyntheticLMSpec make_suite_spec(SuiteKind kind, int index, RandomStream& rng) {
  switch (kind) {
    case SuiteKind::kMyopicTrap:
      return myopic_trap(index, rng);
    case SuiteKind::kConfidentOutlier:
      return confident_outlier(index, rng);
  }
  throw SpecError("unknown suite kind");
}

std::vector<SyntheticLMSpec> generate_consensus_suite(int count, std::uint64_t seed) {
  if (count < 1) throw DomainError("suite size must be >= 1");
  RandomStream rng = seeded_rng(seed, "suite");
  std::vector<SyntheticLMSpec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto kind = i % 2 == 0 ? SuiteKind::kMyopicTrap : SuiteKind::kConfidentOutlier;
    out.push_back(make_suite_spec(kind, i, rng));
  }
  return out;
}

}  // namespace phi
