#include "phi/synthetic_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>

namespace phi {

namespace {

constexpr double kProbTolerance = 1e-9;

bool is_prefix(std::string_view a, std::string_view b) {
  return a.size() <= b.size() && b.compare(0, a.size(), a) == 0;
}

void check_state_exists(const SyntheticLMSpec& spec, const std::string& s) {
  if (!spec.transitions.contains(s) && !spec.terminals.contains(s)) {
    throw SpecError("unknown state '" + s + "'");
  }
}

// Longest start-to-terminal path length; throws on cycles.
int longest_path(const SyntheticLMSpec& spec) {
  enum class Mark { kNone, kActive, kDone };
  std::unordered_map<std::string, Mark> mark;
  std::unordered_map<std::string, int> depth;
  std::function<int(const std::string&)> visit = [&](const std::string& s) -> int {
    check_state_exists(spec, s);
    auto& m = mark[s];
    if (m == Mark::kActive) throw SpecError("cycle through state '" + s + "'");
    if (m == Mark::kDone) return depth[s];
    m = Mark::kActive;
    int best = 0;
    if (auto it = spec.transitions.find(s); it != spec.transitions.end()) {
      for (const auto& tr : it->second) best = std::max(best, 1 + visit(tr.next));
    }
    mark[s] = Mark::kDone;
    depth[s] = best;
    return best;
  };
  return visit(spec.start);
}

std::vector<double> tempered_probs(const std::vector<Transition>& trs, double temperature) {
  std::vector<double> q(trs.size(), 0.0);
  if (temperature == 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < trs.size(); ++i) {
      if (trs[i].prob > trs[best].prob) best = i;
    }
    q[best] = 1.0;
    return q;
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trs.size(); ++i) {
    q[i] = std::log(trs[i].prob) / temperature;
    max_logit = std::max(max_logit, q[i]);
  }
  double total = 0.0;
  for (double& v : q) {
    v = std::exp(v - max_logit);
    total += v;
  }
  for (double& v : q) v /= total;
  return q;
}

}  // namespace

void SyntheticLMSpec::validate() const {
  if (max_depth < 1) throw SpecError("max_depth must be >= 1");
  check_state_exists(*this, start);
  const std::set<std::string> vocab(vocabulary.begin(), vocabulary.end());
  for (const auto& [state, trs] : transitions) {
    if (terminals.contains(state)) throw SpecError("state '" + state + "' is both terminal and inner");
    if (trs.empty()) throw SpecError("state '" + state + "' has no transitions");
    double total = 0.0;
    for (const auto& tr : trs) {
      if (tr.token.empty()) throw SpecError("empty token leaving '" + state + "'");
      if (!vocab.empty() && !vocab.contains(tr.token)) {
        throw SpecError("token '" + tr.token + "' not in vocabulary");
      }
      if (!(tr.prob > 0.0 && tr.prob <= 1.0)) {
        throw SpecError("transition probability out of (0, 1] at '" + state + "'");
      }
      check_state_exists(*this, tr.next);
      total += tr.prob;
    }
    if (std::abs(total - 1.0) > kProbTolerance) {
      throw SpecError("outgoing probabilities of '" + state + "' sum to " + std::to_string(total));
    }
    for (std::size_t i = 0; i < trs.size(); ++i) {
      for (std::size_t j = 0; j < trs.size(); ++j) {
        if (i != j && is_prefix(trs[i].token, trs[j].token)) {
          throw SpecError("tokens leaving '" + state + "' are not prefix-free");
        }
      }
    }
  }
  if (longest_path(*this) > max_depth) throw SpecError("a path exceeds max_depth");
  bool has_correct = false;
  for (const auto& t : enumerate_trajectories(*this)) has_correct |= t.answer == correct_answer;
  if (!has_correct) throw SpecError("no reachable terminal carries the correct answer");
}

void to_json(nlohmann::json& j, const SyntheticLMSpec& s) {
  nlohmann::json trs = nlohmann::json::object();
  for (const auto& [state, list] : s.transitions) {
    auto& arr = trs[state] = nlohmann::json::array();
    for (const auto& tr : list) arr.push_back({{"token", tr.token}, {"prob", tr.prob}, {"next", tr.next}});
  }
  j = nlohmann::json{{"prompt", s.prompt},           {"vocabulary", s.vocabulary},
                     {"start", s.start},             {"transitions", trs},
                     {"terminals", s.terminals},     {"correct_answer", s.correct_answer},
                     {"max_depth", s.max_depth}};
}

void from_json(const nlohmann::json& j, SyntheticLMSpec& s) {
  try {
    s.prompt = j.value("prompt", std::string{});
    s.vocabulary = j.value("vocabulary", std::vector<std::string>{});
    s.start = j.value("start", std::string("s0"));
    s.transitions.clear();
    for (const auto& [state, arr] : j.at("transitions").items()) {
      auto& list = s.transitions[state];
      for (const auto& e : arr) {
        list.push_back({e.at("token").get<std::string>(), e.at("prob").get<double>(),
                        e.at("next").get<std::string>()});
      }
    }
    s.terminals = j.at("terminals").get<std::map<std::string, std::string>>();
    s.correct_answer = j.at("correct_answer").get<std::string>();
    s.max_depth = j.at("max_depth").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed synthetic spec: ") + e.what());
  }
}

std::vector<SyntheticLMSpec> load_synthetic_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synthetic spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("synthetic spec file " + path + ": " + e.what());
  }
  std::vector<SyntheticLMSpec> specs;
  if (j.contains("specs")) {
    for (const auto& e : j.at("specs")) specs.push_back(e.get<SyntheticLMSpec>());
  } else {
    specs.push_back(j.get<SyntheticLMSpec>());
  }
  for (const auto& s : specs) s.validate();
  return specs;
}

void save_synthetic_specs(const std::string& path, const std::vector<SyntheticLMSpec>& specs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write synthetic spec file: " + path);
  nlohmann::json j;
  if (specs.size() == 1) {
    j = specs.front();
  } else {
    j = {{"specs", specs}};
  }
  out << j.dump(2) << '\n';
}

std::string Trajectory::text() const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

std::vector<Trajectory> enumerate_trajectories(const SyntheticLMSpec& spec) {
  std::vector<Trajectory> out;
  std::set<std::string> on_path;
  Trajectory current;
  current.probability = 1.0;
  std::function<void(const std::string&, double)> walk = [&](const std::string& s, double p) {
    check_state_exists(spec, s);
    if (!on_path.insert(s).second) throw SpecError("cycle through state '" + s + "'");
    if (auto term = spec.terminals.find(s); term != spec.terminals.end()) {
      out.push_back({current.tokens, p, term->second});
    } else {
      for (const auto& tr : spec.transitions.at(s)) {
        current.tokens.push_back(tr.token);
        walk(tr.next, p * tr.prob);
        current.tokens.pop_back();
      }
    }
    on_path.erase(s);
  };
  walk(spec.start, 1.0);
  return out;
}

SyntheticLMSpec tempered(const SyntheticLMSpec& spec, double temperature) {
  if (!(temperature >= 0.0)) throw DomainError("temperature must be >= 0");
  SyntheticLMSpec out = spec;
  for (auto& [state, trs] : out.transitions) {
    const auto q = tempered_probs(trs, temperature);
    for (std::size_t i = 0; i < trs.size(); ++i) trs[i].prob = q[i];
  }
  return out;
}

SyntheticLM::SyntheticLM(SyntheticLMSpec spec) : SyntheticLM(std::vector{std::move(spec)}) {}

SyntheticLM::SyntheticLM(std::vector<SyntheticLMSpec> specs) : specs_(std::move(specs)) {
  if (specs_.empty()) throw SpecError("synthetic backend needs at least one spec");
  std::set<std::string> prompts;
  for (const auto& s : specs_) {
    s.validate();
    if (!prompts.insert(s.prompt).second) throw SpecError("duplicate synthetic prompt: " + s.prompt);
  }
}

std::string SyntheticLM::describe() const {
  return "synthetic(" + std::to_string(specs_.size()) + " specs)";
}

SyntheticLM::Located SyntheticLM::locate(std::string_view context) const {
  const SyntheticLMSpec* spec = nullptr;
  for (const auto& s : specs_) {
    if (is_prefix(s.prompt, context) && (!spec || s.prompt.size() > spec->prompt.size())) spec = &s;
  }
  if (!spec) throw ProtocolError("synthetic backend: prompt matches no spec");
  std::string_view rest = context.substr(spec->prompt.size());
  std::string state = spec->start;
  while (!rest.empty()) {
    auto it = spec->transitions.find(state);
    if (it == spec->transitions.end()) {
      throw ProtocolError("synthetic backend: context continues past a terminal state");
    }
    const Transition* hit = nullptr;
    for (const auto& tr : it->second) {
      if (is_prefix(tr.token, rest)) {
        hit = &tr;
        break;
      }
    }
    if (!hit) throw ProtocolError("synthetic backend: context is not a path of the routed SyntheticLMSpec");
    rest.remove_prefix(hit->token.size());
    state = hit->next;
  }
  return {spec, state};
}

std::vector<GenerationResult> SyntheticLM::generate(const GenerationRequest& request) {
  request.validate();
  const Located where = locate(request.prompt);
  const SyntheticLMSpec& spec = *where.spec;
  RandomStream rng = seeded_rng(request.seed, "synthetic");

  std::vector<GenerationResult> out;
  out.reserve(static_cast<std::size_t>(request.n_samples));
  std::int64_t emitted = 0;
  for (int n = 0; n < request.n_samples; ++n) {
    GenerationResult r;
    std::string state = where.state;
    r.finish_reason = FinishReason::kLength;
    while (static_cast<int>(r.token_logprobs.size()) < request.max_tokens) {
      auto it = spec.transitions.find(state);
      if (it == spec.transitions.end()) {
        r.finish_reason = FinishReason::kEos;
        break;
      }
      const auto& trs = it->second;
      const auto q = tempered_probs(trs, request.temperature);
      const auto& tr = trs[sample_categorical(q, rng)];
      const std::size_t before = r.text.size();
      r.text += tr.token;
      r.token_logprobs.push_back(std::log(tr.prob));
      state = tr.next;
      bool stopped = false;
      for (const auto& stop : request.stop_sequences) {
        if (stop.empty()) continue;
        const std::size_t from = before >= stop.size() ? before - stop.size() + 1 : 0;
        if (r.text.find(stop, from) != std::string::npos) stopped = true;
      }
      if (stopped) {
        r.finish_reason = FinishReason::kStopSequence;
        break;
      }
    }
    // Hitting the limit exactly on a terminal still counts as end of sequence.
    if (r.finish_reason == FinishReason::kLength && !spec.transitions.contains(state)) {
      r.finish_reason = FinishReason::kEos;
    }
    emitted += static_cast<std::int64_t>(r.token_logprobs.size());
    out.push_back(std::move(r));
  }
  tokens_generated_.fetch_add(emitted);
  return out;
}

double SyntheticLM::success_probability(const std::string& context, double temperature) const {
  const Located where = locate(context);
  const SyntheticLMSpec& spec = *where.spec;
  std::unordered_map<std::string, double> memo;
  std::function<double(const std::string&)> value = [&](const std::string& s) -> double {
    if (auto term = spec.terminals.find(s); term != spec.terminals.end()) {
      return term->second == spec.correct_answer ? 1.0 : 0.0;
    }
    if (auto m = memo.find(s); m != memo.end()) return m->second;
    const auto& trs = spec.transitions.at(s);
    const auto q = tempered_probs(trs, temperature);
    double v = 0.0;
    for (std::size_t i = 0; i < trs.size(); ++i) v += q[i] * value(trs[i].next);
    memo[s] = v;
    return v;
  };
  return value(where.state);
}

}  // namespace phi
