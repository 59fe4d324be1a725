#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "phi/harness.hpp"
#include "phi/synthetic_lm.hpp"
#include "phi/synthetic_suite.hpp"
#include "test_util.hpp"

namespace phi {
namespace {

using testing::TempDir;
using testing::write_text;

std::vector<TaskRecord> suite_tasks(const std::vector<SyntheticLMSpec>& suite) {
  std::vector<TaskRecord> out;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    out.push_back({"task-" + std::to_string(i), suite[i].prompt, suite[i].correct_answer, {}, {}});
  }
  return out;
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

TEST(Dataset, LoadsRecords) {
  TempDir dir;
  const auto path = dir.file("d.jsonl");
  write_text(path,
             "{\"id\": \"a\", \"prompt\": \"p1\", \"answer\": \"1\"}\n"
             "\n"
             "{\"id\": 2, \"prompt\": \"p2\", \"answer\": 2, \"prefix\": \"Q: \"}\n"
             "{\"id\": \"c\", \"prompt\": \"p3\", \"answer\": \"x\", \"extract\": \"(\\\\d+)\"}\n");
  const auto ds = load_dataset(path);
  ASSERT_EQ(ds.records.size(), 3u);
  EXPECT_TRUE(ds.diagnostics.empty());
  EXPECT_EQ(ds.records[1].id, "2");
  EXPECT_EQ(ds.records[1].gold_answer, "2");
  EXPECT_EQ(ds.records[1].full_prompt(), "Q: p2");
  EXPECT_EQ(ds.records[2].extract, "(\\d+)");
}

TEST(Dataset, MalformedLinesBecomeDiagnostics) {
  TempDir dir;
  const auto path = dir.file("d.jsonl");
  write_text(path,
             "{\"id\": \"a\", \"prompt\": \"p\", \"answer\": \"1\"}\n"
             "{\"id\": \"b\", \"prompt\": \n"
             "{\"id\": \"c\", \"prompt\": \"p\", \"answer\": \"3\"}\n"
             "{\"id\": \"d\", \"prompt\": \"p\", \"answer\": \"4\"}\n");
  const auto ds = load_dataset(path);
  EXPECT_EQ(ds.records.size(), 3u);
  ASSERT_EQ(ds.diagnostics.size(), 1u);
  EXPECT_EQ(ds.diagnostics[0].line, 2);

  write_text(path,
             "{\"id\": \"a\", \"prompt\": \"p\", \"answer\": \"1\"}\n"
             "{\"id\": \"a\", \"prompt\": \"q\", \"answer\": \"2\"}\n"
             "{\"id\": \"b\", \"answer\": \"2\"}\n"
             "[1, 2]\n");
  EXPECT_EQ(load_dataset(path).diagnostics.size(), 3u);
}

TEST(Dataset, EmptyOrMissingFiles) {
  TempDir dir;
  const auto empty = dir.file("empty.jsonl");
  write_text(empty, "");
  EXPECT_THROW(load_dataset(empty), DatasetError);
  EXPECT_THROW(load_dataset(dir.file("nope.jsonl")), IoError);
}

TEST(Dataset, WriteRoundTrip) {
  TempDir dir;
  const auto path = dir.file("rt.jsonl");
  std::vector<TaskRecord> recs{{"x", "line one\nline two", "5", "few shot\n", std::nullopt},
                               {"y", "p", "n/a", std::nullopt, "([a-z]+)"}};
  write_dataset(path, recs);
  const auto back = load_dataset(path).records;
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].prompt, recs[0].prompt);
  EXPECT_EQ(back[0].prefix, recs[0].prefix);
  EXPECT_EQ(back[1].extract, recs[1].extract);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {Strategy::kPhi, Strategy::kAutoregressive, Strategy::kNoForesight, Strategy::kNoCluster,
                 Strategy::kNoPruning}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_EQ(std::string(to_string(Strategy::kNoCluster)), "ablation:no_cluster");
  EXPECT_THROW(parse_strategy("beam"), ConfigError);
}

TEST(TaskSeed, XorOfIdHash) {
  EXPECT_EQ(task_seed(5, "t1"), 5 ^ fnv1a64("t1"));
  EXPECT_NE(task_seed(5, "t1"), task_seed(5, "t2"));
}

class HarnessRun : public ::testing::Test {
 protected:
  void SetUp() override {
    suite = generate_consensus_suite(6, 9);
    dataset = dir.file("suite.jsonl");
    write_dataset(dataset, suite_tasks(suite));
  }
  TempDir dir;
  std::vector<SyntheticLMSpec> suite;
  std::string dataset;
};

TEST_F(HarnessRun, ManifestHashIsReproducible) {
  DecodingConfig cfg;
  cfg.seed = 3;
  SyntheticLM a(suite), b(suite);
  RunOptions opts;
  const auto m1 = run(dataset, cfg, a, opts);
  opts.workers = 3;
  const auto m2 = run(dataset, cfg, b, opts);
  EXPECT_EQ(m1.content_hash(), m2.content_hash());
  EXPECT_EQ(m1.tasks.size(), 6u);
  EXPECT_EQ(m1.errors, 0);

  const auto path = dir.file("m.json");
  m1.save(path);
  const auto back = RunManifest::load(path);
  EXPECT_EQ(back.content_hash(), m1.content_hash());
  EXPECT_EQ(back.config, cfg);

  cfg.seed = 4;
  EXPECT_NE(run(dataset, cfg, a, opts).content_hash(), m1.content_hash());
}

TEST_F(HarnessRun, TokensAndFlopsPerTask) {
  SyntheticLM lm(suite);
  RunOptions opts;
  opts.model_params = 1e9;
  const auto m = run(dataset, DecodingConfig{}, lm, opts);
  std::int64_t total = 0;
  for (const auto& t : m.tasks) {
    EXPECT_EQ(t.output_tokens, t.rollout_tokens + t.foresight_tokens + t.completion_tokens);
    EXPECT_EQ(t.flops, 6.0 * static_cast<double>(t.output_tokens) * 1e9);
    total += t.output_tokens;
  }
  EXPECT_EQ(total, lm.tokens_generated());
}

TEST_F(HarnessRun, ResumeSkipsCompletedTasks) {
  SyntheticLM lm(suite);
  RunOptions opts;
  opts.results_path = dir.file("results.jsonl");
  const auto full = run(dataset, DecodingConfig{}, lm, opts);
  const auto spent = lm.tokens_generated();
  EXPECT_EQ(count_lines(*opts.results_path), 6u);

  // Drop the last two results and add a torn line; only those two rerun.
  std::ifstream in(*opts.results_path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  std::ofstream out(*opts.results_path, std::ios::trunc);
  for (std::size_t i = 0; i < 4; ++i) out << lines[i] << '\n';
  out << lines[4].substr(0, 10);
  out.close();

  SyntheticLM fresh(suite);
  const auto resumed = run(dataset, DecodingConfig{}, fresh, opts);
  EXPECT_EQ(resumed.content_hash(), full.content_hash());
  EXPECT_LT(fresh.tokens_generated(), spent);
  EXPECT_GT(fresh.tokens_generated(), 0);
  // The torn fragment stays on its own line; a second resume does no work.
  SyntheticLM idle(suite);
  EXPECT_EQ(run(dataset, DecodingConfig{}, idle, opts).content_hash(), full.content_hash());
  EXPECT_EQ(idle.tokens_generated(), 0);
}

TEST_F(HarnessRun, BackendFailuresAreRecorded) {
  SyntheticLM other(generate_consensus_suite(2, 100));
  const auto m = run(dataset, DecodingConfig{}, other, RunOptions{});
  EXPECT_EQ(m.errors, 6);
  EXPECT_EQ(m.pass_at_1, 0.0);
  for (const auto& t : m.tasks) EXPECT_EQ(t.stop_reason, "error");
}

TEST_F(HarnessRun, CompareAgainstAutoregressive) {
  SyntheticLM lm(suite);
  RunOptions opts;
  opts.strategy = Strategy::kPhi;
  const auto phi = run(dataset, DecodingConfig{}, lm, opts);
  opts.strategy = Strategy::kAutoregressive;
  const auto ar = run(dataset, DecodingConfig{}, lm, opts);
  const auto rep = compare({phi, ar});
  EXPECT_EQ(rep.baseline, "autoregressive");
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.rows[0].delta_accuracy, phi.pass_at_1 - ar.pass_at_1);
  EXPECT_EQ(rep.rows[1].delta_accuracy, 0.0);
  EXPECT_EQ(rep.rows[1].delta_flops, 0.0);
  EXPECT_GT(rep.rows[0].delta_flops, 0.0);

  std::ostringstream out;
  print_comparison(out, rep);
  EXPECT_NE(out.str().find("deltas vs autoregressive"), std::string::npos);

  EXPECT_THROW(compare({phi}), ComparisonError);
  auto other = ar;
  other.dataset_hash = "deadbeef";
  EXPECT_THROW(compare({phi, other}), ComparisonError);
  const auto self = compare({phi, phi});
  EXPECT_EQ(self.rows[1].delta_accuracy, 0.0);
}

TEST_F(HarnessRun, FlopsOrderingAcrossStrategies) {
  auto avg = [&](Strategy s) {
    SyntheticLM lm(suite);
    RunOptions opts;
    opts.strategy = s;
    return run(dataset, DecodingConfig{}, lm, opts).avg_flops;
  };
  const double phi = avg(Strategy::kPhi);
  EXPECT_GE(avg(Strategy::kNoPruning), phi);
  EXPECT_LT(avg(Strategy::kAutoregressive), avg(Strategy::kNoForesight));
  EXPECT_LT(avg(Strategy::kNoForesight), phi);
}

}  // namespace
}  // namespace phi
