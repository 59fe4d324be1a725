#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "phi/harness.hpp"
#include "phi/http_backend.hpp"
#include "phi/metrics.hpp"
#include "phi/synthetic_lm.hpp"
#include "phi/synthetic_suite.hpp"

namespace {

// Command-line overrides; unset fields leave the base config alone.
struct ConfigFlags {
  std::optional<std::string> config_path;
  std::optional<int> step_beam_size, rollouts_per_beam, foresight_min, foresight_max, num_clusters,
      width_prune_k, step_max_tokens, foresight_max_tokens, completion_max_tokens;
  std::optional<double> early_stop_threshold, temp_advantage, temp_alignment, temp_outer,
      gen_temperature, advantage_weight, alignment_weight;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> token_budget;
  std::optional<std::string> step_delimiter, answer_marker, extract_pattern;
  std::vector<std::string> completion_stop;
  bool disable_foresight = false, disable_cluster = false, disable_pruning = false;
  bool finalize_argmax = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file applied before the flags below");
    app.add_option("-M,--step-beam-size", step_beam_size);
    app.add_option("-N,--rollouts-per-beam", rollouts_per_beam);
    app.add_option("--foresight-min", foresight_min, "T_min");
    app.add_option("--foresight-max", foresight_max, "T_max");
    app.add_option("-K,--num-clusters", num_clusters);
    app.add_option("--early-stop-threshold", early_stop_threshold);
    app.add_option("--temp-advantage", temp_advantage);
    app.add_option("--temp-alignment", temp_alignment);
    app.add_option("--temp-outer", temp_outer);
    app.add_option("--width-prune-k", width_prune_k);
    app.add_option("--gen-temperature", gen_temperature);
    app.add_option("--seed", seed);
    app.add_option("--token-budget", token_budget);
    app.add_option("--advantage-weight", advantage_weight);
    app.add_option("--alignment-weight", alignment_weight);
    app.add_option("--step-delimiter", step_delimiter, "escapes \\n and \\t are expanded");
    app.add_option("--answer-marker", answer_marker);
    app.add_option("--extract-pattern", extract_pattern);
    app.add_option("--completion-stop", completion_stop)->take_all();
    app.add_option("--step-max-tokens", step_max_tokens);
    app.add_option("--foresight-max-tokens", foresight_max_tokens);
    app.add_option("--completion-max-tokens", completion_max_tokens);
    app.add_flag("--disable-foresight", disable_foresight);
    app.add_flag("--disable-cluster", disable_cluster);
    app.add_flag("--disable-pruning", disable_pruning);
    app.add_flag("--finalize-argmax", finalize_argmax);
  }

  static std::string unescape(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) {
        if (s[i + 1] == 'n') {
          out.push_back('\n');
          ++i;
          continue;
        }
        if (s[i + 1] == 't') {
          out.push_back('\t');
          ++i;
          continue;
        }
      }
      out.push_back(s[i]);
    }
    return out;
  }

  phi::DecodingConfig build() const {
    phi::DecodingConfig c = config_path ? phi::load_config(*config_path) : phi::DecodingConfig{};
    auto set = [](auto& field, const auto& flag) {
      if (flag) field = *flag;
    };
    set(c.step_beam_size, step_beam_size);
    set(c.rollouts_per_beam, rollouts_per_beam);
    set(c.foresight_min, foresight_min);
    set(c.foresight_max, foresight_max);
    set(c.num_clusters, num_clusters);
    set(c.width_prune_k, width_prune_k);
    set(c.step_max_tokens, step_max_tokens);
    set(c.foresight_max_tokens, foresight_max_tokens);
    set(c.completion_max_tokens, completion_max_tokens);
    set(c.early_stop_threshold, early_stop_threshold);
    set(c.temp_advantage, temp_advantage);
    set(c.temp_alignment, temp_alignment);
    set(c.temp_outer, temp_outer);
    set(c.gen_temperature, gen_temperature);
    set(c.advantage_weight, advantage_weight);
    set(c.alignment_weight, alignment_weight);
    set(c.seed, seed);
    if (token_budget) c.token_budget = *token_budget;
    if (step_delimiter) c.step_delimiter = unescape(*step_delimiter);
    set(c.answer_marker, answer_marker);
    set(c.extract_pattern, extract_pattern);
    if (!completion_stop.empty()) {
      c.completion_stop.clear();
      for (const auto& s : completion_stop) c.completion_stop.push_back(unescape(s));
    }
    c.disable_foresight = c.disable_foresight || disable_foresight;
    c.disable_cluster = c.disable_cluster || disable_cluster;
    c.disable_pruning = c.disable_pruning || disable_pruning;
    c.finalize_argmax = c.finalize_argmax || finalize_argmax;
    c.validate();
    return c;
  }
};

struct BackendFlags {
  std::string backend = "synthetic";
  std::optional<std::string> spec_path, endpoint, model;
  double rate = 0.0;
  int retries = 3;

  void attach(CLI::App& app) {
    app.add_option("--backend", backend)->check(CLI::IsMember({"synthetic", "http"}));
    app.add_option("--spec", spec_path, "SyntheticLMSpec file for --backend synthetic");
    app.add_option("--endpoint", endpoint, "base URL, default $PHI_ENDPOINT");
    app.add_option("--model", model, "model name, default $PHI_MODEL");
    app.add_option("--rate", rate, "request rate limit per second, 0 for none");
    app.add_option("--retries", retries);
  }

  std::unique_ptr<phi::LanguageModel> build() const {
    if (backend == "synthetic") {
      if (!spec_path) throw phi::ConfigError(phi::ConfigViolation::kMalformed, "--backend synthetic needs --spec");
      return std::make_unique<phi::SyntheticLM>(phi::load_synthetic_specs(*spec_path));
    }
    auto o = phi::HttpBackendOptions::from_environment();
    if (endpoint) o.base_url = *endpoint;
    if (model) o.model = *model;
    if (o.model.empty()) throw phi::ConfigError(phi::ConfigViolation::kMalformed, "--backend http needs --model or $PHI_MODEL");
    o.max_retries = retries;
    if (rate > 0.0) o.limiter = std::make_shared<phi::TokenBucket>(rate, std::max(1.0, rate));
    return std::make_unique<phi::HttpBackend>(std::move(o));
  }
};

int cmd_run(const std::string& dataset, const std::string& strategy, const ConfigFlags& cf,
            const BackendFlags& bf, int workers, double params, const std::optional<std::string>& results,
            const std::string& manifest_out) {
  const auto cfg = cf.build();
  auto lm = bf.build();
  phi::RunOptions opts;
  opts.strategy = phi::parse_strategy(strategy);
  opts.workers = workers;
  opts.model_params = params;
  opts.results_path = results;
  opts.log = &std::cerr;
  const auto m = phi::run(dataset, cfg, *lm, opts);
  m.save(manifest_out);
  phi::print_run_summary(std::cout, m);
  std::cout << "manifest " << manifest_out << " (" << m.content_hash().substr(0, 16) << ")\n";
  return m.errors == 0 ? 0 : 1;
}

int cmd_compare(const std::vector<std::string>& paths) {
  std::vector<phi::RunManifest> ms;
  for (const auto& p : paths) ms.push_back(phi::RunManifest::load(p));
  phi::print_comparison(std::cout, phi::compare(ms));
  return 0;
}

int cmd_synth_gen(int count, std::uint64_t seed, const std::string& out, const std::optional<std::string>& dataset,
                  const std::optional<std::string>& config_out, double temp_outer) {
  const auto specs = phi::generate_consensus_suite(count, seed);
  phi::save_synthetic_specs(out, specs);
  if (dataset) {
    std::vector<phi::TaskRecord> records;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      records.push_back({"synth-" + std::to_string(i), specs[i].prompt, specs[i].correct_answer, std::nullopt, std::nullopt});
    }
    phi::write_dataset(*dataset, records);
  }
  if (config_out) {
    phi::DecodingConfig cfg;
    cfg.temp_outer = temp_outer;
    nlohmann::json j;
    phi::to_json(j, cfg);
    std::ofstream f(*config_out);
    if (!f) throw phi::IoError("cannot write " + *config_out);
    f << j.dump(2) << '\n';
  }
  std::cout << "wrote " << specs.size() << " specs to " << out << '\n';
  return 0;
}

int cmd_flops_report(const std::vector<std::string>& paths, std::optional<double> params) {
  for (const auto& p : paths) {
    const auto m = phi::RunManifest::load(p);
    const double P = params.value_or(m.model_params);
    std::int64_t roll = 0, fore = 0, comp = 0;
    for (const auto& t : m.tasks) {
      roll += t.rollout_tokens;
      fore += t.foresight_tokens;
      comp += t.completion_tokens;
    }
    const auto total = roll + fore + comp;
    const double n = static_cast<double>(std::max<std::size_t>(m.tasks.size(), 1));
    std::cout << p << " [" << m.strategy << "] P=" << P << '\n'
              << "  rollout tokens     " << roll << '\n'
              << "  foresight tokens   " << fore << '\n'
              << "  completion tokens  " << comp << '\n'
              << "  total tokens       " << total << '\n'
              << "  total FLOPS        " << phi::flops(total, P) << '\n'
              << "  avg FLOPS per task " << phi::flops(total, P) / n << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Step-beam decoding with foresight sampling"};
  app.require_subcommand(1);

  ConfigFlags run_cfg;
  BackendFlags run_backend;
  std::string dataset, strategy = "phi", manifest_out = "manifest.json";
  std::optional<std::string> results;
  int workers = 1;
  double params = 8e9;
  auto* run = app.add_subcommand("run", "decode every task of a dataset and write a manifest");
  run->add_option("--dataset", dataset, "JSONL dataset")->required();
  run->add_option("--strategy", strategy,
                  "phi | autoregressive | ablation:no_foresight | ablation:no_cluster | ablation:no_pruning");
  run->add_option("--workers", workers, "tasks decoded concurrently");
  run->add_option("--model-params", params, "parameter count for the FLOPS estimate");
  run->add_option("--results", results, "append-only per-task JSONL; completed ids are skipped");
  run->add_option("-o,--manifest", manifest_out);
  run_cfg.attach(*run);
  run_backend.attach(*run);

  std::vector<std::string> compare_paths;
  auto* cmp = app.add_subcommand("compare", "side-by-side accuracy and FLOPS of run manifests");
  cmp->add_option("manifests", compare_paths)->required()->expected(2, -1);

  int count = 20;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "suite.json";
  std::optional<std::string> synth_dataset, synth_config;
  double synth_temp_outer = 0.05;
  auto* syn = app.add_subcommand("synth-gen", "write a synthetic LM suite, optionally with its dataset");
  syn->add_option("--count", count);
  syn->add_option("--seed", synth_seed);
  syn->add_option("-o,--out", synth_out);
  syn->add_option("--dataset", synth_dataset, "also write a JSONL dataset of the suite's prompts");
  syn->add_option("--config", synth_config, "also write a decoding config for the suite");
  syn->add_option("--temp-outer", synth_temp_outer, "temp_outer in the written config");

  std::vector<std::string> flops_paths;
  std::optional<double> flops_params;
  auto* fr = app.add_subcommand("flops-report", "token and FLOPS breakdown of run manifests");
  fr->add_option("manifests", flops_paths)->required();
  fr->add_option("--model-params", flops_params, "override the manifest's parameter count");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(dataset, strategy, run_cfg, run_backend, workers, params, results, manifest_out);
    if (*cmp) return cmd_compare(compare_paths);
    if (*syn) return cmd_synth_gen(count, synth_seed, synth_out, synth_dataset, synth_config, synth_temp_outer);
    if (*fr) return cmd_flops_report(flops_paths, flops_params);
  } catch (const phi::ComparisonError& e) {
    std::cerr << "compare: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
