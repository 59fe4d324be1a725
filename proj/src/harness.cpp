#include "phi/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "phi/metrics.hpp"

namespace phi {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) throw DatasetError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

std::string answer_field(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  throw DatasetError("field 'answer' must be a string or number");
}

}  // namespace

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path);
  Dataset ds;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw DatasetError("record is not an object");
      for (const char* key : {"id", "prompt", "answer"}) {
        if (!j.contains(key)) throw DatasetError(std::string("missing field '") + key + "'");
      }
      TaskRecord r;
      if (j.at("id").is_string()) {
        r.id = j.at("id").get<std::string>();
      } else if (j.at("id").is_number_integer()) {
        r.id = std::to_string(j.at("id").get<long long>());
      } else {
        throw DatasetError("field 'id' must be a string or integer");
      }
      if (!j.at("prompt").is_string()) throw DatasetError("field 'prompt' must be a string");
      r.prompt = j.at("prompt").get<std::string>();
      r.gold_answer = answer_field(j.at("answer"));
      r.prefix = optional_string(j, "prefix");
      r.extract = optional_string(j, "extract");
      if (r.id.empty()) throw DatasetError("empty id");
      if (r.prompt.empty()) throw DatasetError("empty prompt");
      if (!ids.insert(r.id).second) throw DatasetError("duplicate id '" + r.id + "'");
      ds.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      ds.diagnostics.push_back({lineno, e.what()});
    } catch (const DatasetError& e) {
      ds.diagnostics.push_back({lineno, e.what()});
    }
  }
  if (in.bad()) throw IoError("error reading dataset " + path);
  if (ds.records.empty()) {
    std::string msg = "dataset " + path + " has no valid records";
    if (!ds.diagnostics.empty()) {
      msg += " (line " + std::to_string(ds.diagnostics.front().line) + ": " +
             ds.diagnostics.front().message + ")";
    }
    throw DatasetError(msg);
  }
  return ds;
}

void write_dataset(const std::string& path, const std::vector<TaskRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : records) {
    nlohmann::json j{{"id", r.id}, {"prompt", r.prompt}, {"answer", r.gold_answer}};
    if (r.prefix) j["prefix"] = *r.prefix;
    if (r.extract) j["extract"] = *r.extract;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("error writing " + path);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return ss.str();
}

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kPhi:
      return "phi";
    case Strategy::kAutoregressive:
      return "autoregressive";
    case Strategy::kNoForesight:
      return "ablation:no_foresight";
    case Strategy::kNoCluster:
      return "ablation:no_cluster";
    case Strategy::kNoPruning:
      return "ablation:no_pruning";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  for (auto s : {Strategy::kPhi, Strategy::kAutoregressive, Strategy::kNoForesight,
                 Strategy::kNoCluster, Strategy::kNoPruning}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError(ConfigViolation::kMalformed, "unknown strategy '" + name + "'");
}

DecodeResult decode_with(Strategy s, const std::string& prompt, const DecodingConfig& cfg,
                         LanguageModel& lm) {
  switch (s) {
    case Strategy::kPhi:
      return phi_decode(prompt, cfg, lm);
    case Strategy::kAutoregressive:
      return autoregressive_decode(prompt, cfg, lm);
    case Strategy::kNoForesight:
      return run_ablation(Ablation::kNoForesight, prompt, cfg, lm);
    case Strategy::kNoCluster:
      return run_ablation(Ablation::kNoCluster, prompt, cfg, lm);
    case Strategy::kNoPruning:
      return run_ablation(Ablation::kNoPruning, prompt, cfg, lm);
  }
  throw DomainError("unknown strategy");
}

std::uint64_t task_seed(std::uint64_t run_seed, const std::string& task_id) noexcept {
  return run_seed ^ fnv1a64(task_id);
}

void to_json(nlohmann::json& j, const TaskSummary& s) {
  j = nlohmann::json{{"id", s.id},
                     {"answer", s.answer ? nlohmann::json(*s.answer) : nlohmann::json(nullptr)},
                     {"gold", s.gold},
                     {"correct", s.correct},
                     {"rollout_tokens", s.rollout_tokens},
                     {"foresight_tokens", s.foresight_tokens},
                     {"completion_tokens", s.completion_tokens},
                     {"output_tokens", s.output_tokens},
                     {"flops", s.flops},
                     {"timesteps", s.timesteps},
                     {"stop_reason", s.stop_reason},
                     {"error", s.error ? nlohmann::json(*s.error) : nlohmann::json(nullptr)},
                     {"wall_seconds", s.wall_seconds}};
}

void from_json(const nlohmann::json& j, TaskSummary& s) {
  s.id = j.at("id").get<std::string>();
  s.answer = j.at("answer").is_null() ? std::nullopt : std::optional(j.at("answer").get<std::string>());
  s.gold = j.at("gold").get<std::string>();
  s.correct = j.at("correct").get<bool>();
  s.rollout_tokens = j.at("rollout_tokens").get<std::int64_t>();
  s.foresight_tokens = j.at("foresight_tokens").get<std::int64_t>();
  s.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  s.output_tokens = j.at("output_tokens").get<std::int64_t>();
  s.flops = j.at("flops").get<double>();
  s.timesteps = j.at("timesteps").get<int>();
  s.stop_reason = j.at("stop_reason").get<std::string>();
  s.error = j.at("error").is_null() ? std::nullopt : std::optional(j.at("error").get<std::string>());
  s.wall_seconds = j.value("wall_seconds", 0.0);
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json cfg_json;
  phi::to_json(cfg_json, config);
  return {{"config", cfg_json},         {"strategy", strategy},
          {"backend", backend},         {"dataset_path", dataset_path},
          {"dataset_hash", dataset_hash}, {"model_params", model_params},
          {"tasks", tasks},             {"pass_at_1", pass_at_1},
          {"avg_flops", avg_flops},     {"errors", errors},
          {"wall_seconds", wall_seconds}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config = j.at("config").get<DecodingConfig>();
  m.strategy = j.at("strategy").get<std::string>();
  m.backend = j.at("backend").get<std::string>();
  m.dataset_path = j.at("dataset_path").get<std::string>();
  m.dataset_hash = j.at("dataset_hash").get<std::string>();
  m.model_params = j.at("model_params").get<double>();
  m.tasks = j.at("tasks").get<std::vector<TaskSummary>>();
  m.pass_at_1 = j.at("pass_at_1").get<double>();
  m.avg_flops = j.at("avg_flops").get<double>();
  m.errors = j.at("errors").get<int>();
  m.wall_seconds = j.value("wall_seconds", 0.0);
  return m;
}

std::string RunManifest::content_hash() const {
  auto j = to_json();
  j.erase("wall_seconds");
  for (auto& t : j["tasks"]) t.erase("wall_seconds");
  return sha256_hex(j.dump());
}

void RunManifest::save(const std::string& path) const {
  auto j = to_json();
  j["content_hash"] = content_hash();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error writing manifest " + path);
}

RunManifest RunManifest::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path + ": " + e.what());
  }
}

void aggregate(RunManifest& m) {
  m.errors = 0;
  double hits = 0.0, flops_sum = 0.0;
  for (const auto& t : m.tasks) {
    if (t.error) ++m.errors;
    if (t.correct) hits += 1.0;
    flops_sum += t.flops;
  }
  const double n = static_cast<double>(std::max<std::size_t>(m.tasks.size(), 1));
  m.pass_at_1 = hits / n;
  m.avg_flops = flops_sum / n;
}

namespace {

TaskSummary summarize(const TaskRecord& task, const DecodeTrace& trace, double params) {
  TaskSummary s;
  s.id = task.id;
  s.gold = task.gold_answer;
  s.rollout_tokens = trace.rollout_tokens();
  s.foresight_tokens = trace.foresight_tokens();
  s.completion_tokens = trace.completion_tokens;
  s.output_tokens = trace.reconciled_tokens();
  s.flops = flops(s.output_tokens, params);
  s.timesteps = static_cast<int>(trace.steps.size());
  return s;
}

std::map<std::string, TaskSummary> load_completed(const std::string& path) {
  std::map<std::string, TaskSummary> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  while (std::getline(in, line)) {
    // A torn final line from an interrupted run is ignored.
    try {
      auto s = nlohmann::json::parse(line).get<TaskSummary>();
      if (!s.error) done[s.id] = std::move(s);
    } catch (const nlohmann::json::exception&) {
    }
  }
  return done;
}

}  // namespace

RunManifest run(const std::string& dataset_path, const DecodingConfig& cfg, LanguageModel& lm,
                const RunOptions& opts) {
  cfg.validate();
  if (opts.workers < 1) throw ConfigError(ConfigViolation::kMalformed, "workers must be >= 1");
  const Dataset ds = load_dataset(dataset_path);
  if (opts.log) {
    for (const auto& d : ds.diagnostics) {
      *opts.log << dataset_path << ':' << d.line << ": skipped: " << d.message << '\n';
    }
  }

  RunManifest m;
  m.config = cfg;
  m.strategy = to_string(opts.strategy);
  m.backend = lm.describe();
  m.dataset_path = dataset_path;
  m.dataset_hash = file_sha256(dataset_path);
  m.model_params = opts.model_params;
  m.tasks.resize(ds.records.size());

  std::map<std::string, TaskSummary> done;
  std::ofstream results;
  if (opts.results_path) {
    done = load_completed(*opts.results_path);
    bool torn = false;
    if (std::ifstream prev(*opts.results_path, std::ios::binary | std::ios::ate); prev && prev.tellg() > 0) {
      prev.seekg(-1, std::ios::end);
      torn = prev.get() != '\n';
    }
    results.open(*opts.results_path, std::ios::app);
    if (!results) throw IoError("cannot append to " + *opts.results_path);
    if (torn) results << '\n';
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (auto it = done.find(ds.records[i].id); it != done.end()) {
      m.tasks[i] = it->second;
    } else {
      todo.push_back(i);
    }
  }

  const auto start = std::chrono::steady_clock::now();
  const auto count = static_cast<std::ptrdiff_t>(todo.size());
#pragma omp parallel for schedule(dynamic) num_threads(opts.workers)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const TaskRecord& task = ds.records[todo[static_cast<std::size_t>(k)]];
    DecodingConfig task_cfg = cfg;
    task_cfg.seed = task_seed(cfg.seed, task.id);
    if (task.extract) task_cfg.extract_pattern = *task.extract;
    TaskSummary s;
    try {
      const auto r = decode_with(opts.strategy, task.full_prompt(), task_cfg, lm);
      s = summarize(task, r.trace, opts.model_params);
      s.answer = r.extracted_answer;
      s.correct = r.extracted_answer && answers_match(*r.extracted_answer, task.gold_answer);
      s.stop_reason = to_string(r.stop_reason);
      s.wall_seconds = r.trace.wall_seconds;
    } catch (const DecodeError& e) {
      s = summarize(task, e.trace(), opts.model_params);
      s.error = e.what();
      s.stop_reason = "error";
    } catch (const std::exception& e) {
      s = summarize(task, DecodeTrace{}, opts.model_params);
      s.error = e.what();
      s.stop_reason = "error";
    }
#pragma omp critical(phi_run_results)
    {
      if (results.is_open()) {
        results << nlohmann::json(s).dump() << '\n';
        results.flush();
      }
      if (opts.log && s.error) *opts.log << "task " << s.id << " failed: " << *s.error << '\n';
    }
    m.tasks[todo[static_cast<std::size_t>(k)]] = std::move(s);
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  aggregate(m);
  return m;
}

ComparisonReport compare(const std::vector<RunManifest>& manifests) {
  if (manifests.size() < 2) throw ComparisonError("compare needs at least two manifests");
  ComparisonReport rep;
  rep.dataset_hash = manifests.front().dataset_hash;
  for (const auto& m : manifests) {
    if (m.dataset_hash != rep.dataset_hash) {
      throw ComparisonError("dataset hash mismatch: " + m.dataset_hash + " vs " + rep.dataset_hash);
    }
  }
  std::size_t base = 0;
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    if (manifests[i].strategy == to_string(Strategy::kAutoregressive)) {
      base = i;
      break;
    }
  }
  rep.baseline = manifests[base].strategy;
  for (const auto& m : manifests) {
    rep.rows.push_back({m.strategy, m.pass_at_1, m.avg_flops, m.pass_at_1 - manifests[base].pass_at_1,
                        m.avg_flops - manifests[base].avg_flops});
  }
  return rep;
}

void print_comparison(std::ostream& out, const ComparisonReport& report) {
  std::vector<SummaryRow> rows;
  for (const auto& r : report.rows) rows.push_back({r.label, r.pass_at_1, r.avg_flops, r.delta_accuracy});
  out << "dataset " << report.dataset_hash.substr(0, 12) << ", deltas vs " << report.baseline << '\n';
  print_summary_table(out, rows);
}

void print_run_summary(std::ostream& out, const RunManifest& m) {
  print_summary_table(out, {{m.strategy, m.pass_at_1, m.avg_flops, std::nullopt}});
  if (m.errors > 0) out << m.errors << " of " << m.tasks.size() << " tasks failed\n";
}

}  // namespace phi
