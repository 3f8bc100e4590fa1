#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "pesaerl/harness.hpp"

using namespace pesaerl;
namespace fs = std::filesystem;

namespace {

RunConfig small_sphere(std::uint64_t seed = 1) {
  RunConfig c;
  c.env = "effective_sphere";
  c.env_dim = 120;
  c.effective_dim = 4;
  c.search.embedded_dim = 10;
  c.max_steps = 150;
  c.test_episodes = 1;
  c.search.seed = seed;
  return c;
}

RunConfig small_cartpole(std::uint64_t seed = 1) {
  RunConfig c;
  c.env = "cartpole";
  c.network = "input 4; dense 4 8 relu; dense 8 2 none";
  c.search.embedded_dim = 20;
  c.max_steps = 3000;
  c.test_episodes = 3;
  c.search.seed = seed;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pesaerl_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, TextRoundTrip) {
  RunConfig c = small_cartpole(77);
  c.search.ncs.phi = 0.3;
  c.search.fcps.rule = SelectionRule::top_quantile;
  c.search.embedding_mode = EmbeddingMode::fixed;
  const RunConfig back = RunConfig::parse(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.search.ncs.phi, 0.3);
  EXPECT_EQ(back.network, c.network);
}

TEST(Config, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.search.ncs.lambda, 6u);
  EXPECT_EQ(c.search.embedded_dim, 100u);
  EXPECT_EQ(c.search.ncs.epoch, 5u);
  EXPECT_EQ(c.search.ncs.r, 1.2);
  EXPECT_EQ(c.search.ncs.candidates, 3u);
  EXPECT_EQ(c.search.ncs.phi, 1.0);
  EXPECT_EQ(c.search.bounds.low, -0.1);
  EXPECT_EQ(c.search.bounds.high, 0.1);
}

TEST(Config, UnknownKeyListsValidNames) {
  try {
    RunConfig::parse("ncs.lamda = 4\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ncs.lamda"), std::string::npos);
    EXPECT_NE(msg.find("ncs.lambda"), std::string::npos);
  }
  EXPECT_THROW(RunConfig::parse("ncs.lambda = -3"), ConfigError);
  EXPECT_THROW(RunConfig::parse("ncs.r = fast"), ConfigError);
  EXPECT_THROW(RunConfig::parse("surrogate.enabled = maybe"), ConfigError);
  EXPECT_THROW(RunConfig::parse("just words"), ConfigError);
  EXPECT_NO_THROW(RunConfig::parse("# comment\n\n seed = 4 # trailing\n"));
}

TEST(Config, Validation) {
  RunConfig c = small_sphere();
  c.effective_dim = 500;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_sphere();
  c.env = "pong";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Run, ByteIdenticalLogs) {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  RunConfig c = small_cartpole(5);
  c.output_dir = a.string();
  run(c);
  c.output_dir = b.string();
  run(c);
  EXPECT_EQ(slurp(a / "log.jsonl"), slurp(b / "log.jsonl"));
  EXPECT_EQ(slurp(a / "trace.tsv"), slurp(b / "trace.tsv"));
  EXPECT_EQ(slurp(a / "best_policy.json"), slurp(b / "best_policy.json"));
}

TEST(Run, InitializationOnlyBudget) {
  RunConfig c = small_sphere();
  c.max_steps = c.search.ncs.lambda;
  const auto r = run(c);
  EXPECT_EQ(r.summary.generations, 0u);
  EXPECT_EQ(r.rows.size(), 6u);
  double best = -1e300;
  for (const auto& row : r.rows) best = std::max(best, row.fitness);
  EXPECT_EQ(r.summary.best_fitness, best);
}

TEST(Run, LogAccountsForEveryStep) {
  const auto r = run(small_cartpole(2));
  EXPECT_EQ(r.rows.size(), r.summary.evaluations);
  EXPECT_EQ(r.rows.back().steps_used, r.summary.steps_used);
  EXPECT_EQ(r.summary.evaluations, 6 * (r.summary.generations + 1));
  // overshoot never exceeds what the last generation could add
  EXPECT_LT(r.summary.steps_used - r.rows[r.rows.size() - 6].steps_used, 6u * 8000);
  EXPECT_EQ(r.summary.test_returns.size(), 3u);
}

TEST(Run, BestIsTrackedAcrossAllEvaluations) {
  const auto r = run(small_sphere(3));
  double best = -1e300;
  std::size_t at = 0;
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    if (r.rows[i].fitness > best) {
      best = r.rows[i].fitness;
      at = i + 1;
    }
  EXPECT_EQ(r.summary.best_fitness, best);
  EXPECT_EQ(r.summary.best_evaluation, at);
}

TEST(Checkpoint, RoundTripIsLossless) {
  RunConfig c = small_sphere(4);
  c.search.embedding_mode = EmbeddingMode::fixed;
  c.search.fcps.capacity = 10;  // force wrap-around
  const auto evaluator = c.make_evaluator();
  FitnessBudget budget(c.max_steps);
  PolicySearch s(c.search, *evaluator, budget);
  s.initialize();
  for (int g = 0; g < 4; ++g) s.step();

  Checkpoint cp;
  cp.config = c;
  cp.state = s.state();
  cp.archive = archive_contents(s.archive());
  cp.archive_next_sequence = s.archive().next_sequence();
  cp.log_bytes = 123;
  cp.trace_bytes = 45;
  const auto bytes = ordered_json::to_cbor(to_json(cp));
  const Checkpoint back = checkpoint_from_json(ordered_json::from_cbor(bytes));

  EXPECT_EQ(back.config.to_text(), c.to_text());
  EXPECT_EQ(back.state.generation, cp.state.generation);
  EXPECT_EQ(back.state.steps_used, cp.state.steps_used);
  EXPECT_EQ(back.state.evaluations, cp.state.evaluations);
  ASSERT_EQ(back.state.processes.size(), cp.state.processes.size());
  for (std::size_t i = 0; i < cp.state.processes.size(); ++i) {
    const auto &a = cp.state.processes[i], &b = back.state.processes[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.sigma, b.sigma);
    EXPECT_EQ(a.fitness, b.fitness);
    EXPECT_EQ(a.success_count, b.success_count);
    EXPECT_EQ(a.iter_in_epoch, b.iter_in_epoch);
    EXPECT_EQ(a.rng, b.rng);
  }
  EXPECT_EQ(back.state.best.x, cp.state.best.x);
  EXPECT_EQ(back.state.best.fitness, cp.state.best.fitness);
  EXPECT_EQ(back.state.best.evaluation, cp.state.best.evaluation);
  ASSERT_EQ(back.state.embedded_archive.size(), cp.state.embedded_archive.size());
  for (std::size_t i = 0; i < cp.state.embedded_archive.size(); ++i) {
    EXPECT_EQ(back.state.embedded_archive[i].first, cp.state.embedded_archive[i].first);
    EXPECT_EQ(back.state.embedded_archive[i].second, cp.state.embedded_archive[i].second);
  }
  ASSERT_EQ(back.archive.size(), cp.archive.size());
  for (std::size_t i = 0; i < cp.archive.size(); ++i) {
    EXPECT_EQ(back.archive[i].first, cp.archive[i].first);
    EXPECT_EQ(back.archive[i].second, cp.archive[i].second);
  }
  EXPECT_EQ(back.archive_next_sequence, cp.archive_next_sequence);
  EXPECT_EQ(back.log_bytes, 123u);
  EXPECT_EQ(back.trace_bytes, 45u);
}

class ResumeTest : public ::testing::TestWithParam<int> {};

TEST_P(ResumeTest, MatchesUninterruptedRun) {
  RunConfig c;
  switch (GetParam()) {
    case 0: c = small_sphere(6); break;
    case 1:
      c = small_sphere(6);
      c.search.embedding_mode = EmbeddingMode::fixed;
      c.search.fcps.capacity = 20;
      break;
    default: c = small_cartpole(6); break;
  }
  const auto full = fresh_dir("full_" + std::to_string(GetParam()));
  const auto part = fresh_dir("part_" + std::to_string(GetParam()));
  c.output_dir = full.string();
  const auto whole = run(c);
  ASSERT_GT(whole.summary.generations, 4u);

  c.output_dir = part.string();
  c.stop_after_generation = whole.summary.generations / 2;
  const auto first = run(c);
  EXPECT_TRUE(first.halted);
  const auto second = resume(part.string());
  EXPECT_FALSE(second.halted);

  EXPECT_EQ(slurp(full / "log.jsonl"), slurp(part / "log.jsonl"));
  EXPECT_EQ(slurp(full / "trace.tsv"), slurp(part / "trace.tsv"));
  EXPECT_EQ(slurp(full / "best_policy.json"), slurp(part / "best_policy.json"));
  ASSERT_EQ(first.rows.size() + second.rows.size(), whole.rows.size());
  EXPECT_EQ(second.summary.best_fitness, whole.summary.best_fitness);
  EXPECT_EQ(second.summary.test_score, whole.summary.test_score);
}

INSTANTIATE_TEST_SUITE_P(Modes, ResumeTest, ::testing::Values(0, 1, 2));

TEST(Resume, LogsAfterCrashAreTruncatedToCheckpoint) {
  RunConfig c = small_sphere(8);
  const auto dir = fresh_dir("crash");
  c.output_dir = dir.string();
  c.stop_after_generation = 5;
  run(c);
  // Garbage appended after the checkpoint, as a crash mid-generation would leave.
  std::ofstream(dir / "log.jsonl", std::ios::app) << "{\"type\":\"row\",\"partial\n";
  resume(dir.string());
  c.output_dir = fresh_dir("crash_ref").string();
  c.stop_after_generation = 0;
  run(c);
  EXPECT_EQ(slurp(dir / "log.jsonl"), slurp(fs::path(c.output_dir) / "log.jsonl"));
}

TEST(Run, UnwritableOutputIsIoError) {
  const auto blocker = fresh_dir("blocker");
  std::ofstream(blocker) << "not a directory";
  RunConfig c = small_sphere();
  c.output_dir = (blocker / "sub").string();
  EXPECT_THROW(run(c), IoError);
  EXPECT_THROW(resume((blocker / "nothing").string()), IoError);
}

TEST(Run, LogRowsAreJson) {
  const auto dir = fresh_dir("json");
  RunConfig c = small_sphere(9);
  c.output_dir = dir.string();
  c.log_archive = true;
  const auto r = run(c);
  std::ifstream in(dir / "log.jsonl");
  std::size_t rows = 0, summaries = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j["type"] == "row") {
      ++rows;
      EXPECT_TRUE(j.contains("memberships"));
      EXPECT_TRUE(j.contains("embedding_seed"));
    } else {
      ++summaries;
      EXPECT_EQ(j["evaluations"], r.summary.evaluations);
    }
  }
  EXPECT_EQ(rows, r.rows.size());
  EXPECT_EQ(summaries, 1u);
  std::ifstream arch(dir / "archive.jsonl");
  std::size_t archived = 0;
  for (std::string line; std::getline(arch, line);) ++archived;
  EXPECT_EQ(archived, std::min<std::size_t>(r.rows.size(), c.search.fcps.capacity));
}

TEST(Rescore, MatchesRunTestScore) {
  const RunConfig c = small_cartpole(10);
  const auto r = run(c);
  const auto again = rescore(c, std::span<const double>(r.best_x.data(), r.best_x.size()), 3);
  EXPECT_EQ(again.mean, r.summary.test_score);
  EXPECT_THROW(rescore(c, std::vector<double>(5), 3), InputError);
}

TEST(Sweep, SingleValueEqualsRun) {
  RunConfig c = small_sphere(11);
  const auto entries = sweep(c, "ncs.m", {"3"});
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].test_scores.size(), 1u);
  EXPECT_EQ(entries[0].test_scores[0], run(c).summary.test_score);
}

TEST(Sweep, AggregatesMatchHandArithmetic) {
  RunConfig c = small_sphere(12);
  c.repeat = 4;
  const auto entries = sweep(c, "ncs.m", {"1", "5"});
  for (const auto& e : entries) {
    ASSERT_EQ(e.test_scores.size(), 4u);
    for (std::size_t r = 0; r < 4; ++r) {
      RunConfig one = c;
      one.set("ncs.m", e.value);
      one.search.seed = c.search.seed + r;
      EXPECT_EQ(e.test_scores[r], run(one).summary.test_score);
    }
    auto v = e.test_scores;
    std::sort(v.begin(), v.end());
    EXPECT_DOUBLE_EQ(e.stats.mean, (v[0] + v[1] + v[2] + v[3]) / 4.0);
    EXPECT_DOUBLE_EQ(e.stats.median, (v[1] + v[2]) / 2.0);
    EXPECT_EQ(e.stats.min, v[0]);
    EXPECT_EQ(e.stats.max, v[3]);
  }
}

TEST(Sweep, UnknownParameterListsNames) {
  try {
    sweep(small_sphere(), "ncs.mm", {"1"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ncs.m,"), std::string::npos);
  }
}

TEST(Compare, SelfComparisonIsOne) {
  const RunConfig c = small_sphere(13);
  const auto probe = run(c);
  const double target = probe.summary.best_fitness;
  const auto rep = compare(c, c, target, 3);
  ASSERT_TRUE(rep.median_ratio);
  EXPECT_EQ(*rep.median_ratio, 1.0);
  EXPECT_EQ(rep.b_not_slower, 3u);
}

TEST(Compare, TargetBelowInitialFitness) {
  RunConfig a = small_sphere(14), b = small_sphere(14);
  b.search.ncs.candidates = 1;
  b.search.surrogate = false;
  const auto rep = compare(a, b, -1e9, 2);
  for (const auto& p : rep.pairs) {
    EXPECT_EQ(*p.a.evaluations, 1u);
    EXPECT_EQ(*p.b.evaluations, 1u);
    EXPECT_EQ(*p.ratio, 1.0);
  }
}

TEST(Compare, UnreachedTargetsReported) {
  const RunConfig c = small_sphere(15);
  const auto rep = compare(c, c, 1.0, 2);  // sphere fitness is never positive
  EXPECT_FALSE(rep.median_ratio);
  const auto j = to_json(rep);
  EXPECT_EQ(j["pairs"][0]["evaluations_a"], "not reached");
  RunConfig other = c;
  other.env_dim = 121;
  EXPECT_THROW(compare(c, other, 0.0, 1), ConfigError);
}
