#pragma once

// Experiment driver: budgeted runs with JSON-lines logs, checkpoints and
// resume, grid sweeps over one config key, and evaluations-to-target
// comparisons between two configurations.
//
// Files written to `run.output_dir` (nothing is written when it is empty):
//   config.txt        effective configuration
//   log.jsonl         one row per true evaluation, then one summary record
//   trace.tsv         per-generation best fitness and step sizes (plot data)
//   checkpoint.cbor   latest resumable state
//   best_policy.json  best policy found and its test score
//   archive.jsonl     archive contents (run.log_archive = true)
//   timing.json       wall-clock figures (kept out of the deterministic logs)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "pesaerl/config.hpp"
#include "pesaerl/environments.hpp"
#include "pesaerl/errors.hpp"
#include "pesaerl/ncs.hpp"
#include "pesaerl/surrogate.hpp"

namespace pesaerl {

using ordered_json = nlohmann::ordered_json;

struct RunRow {
  std::size_t generation = 0;
  std::size_t process_id = 0;
  double fitness = 0.0;
  double sigma = 0.0;
  bool accepted = false;
  std::optional<double> membership;  // of the chosen candidate, when scored
  std::size_t chosen = 0;
  std::vector<double> memberships;
  std::uint64_t steps_used = 0;
  std::uint64_t embedding_seed = 0;
};

struct RunSummary {
  double best_fitness = 0.0;
  double test_score = 0.0;
  std::vector<double> test_returns;
  std::size_t generations = 0;
  std::uint64_t evaluations = 0;
  std::uint64_t steps_used = 0;
  std::uint64_t overshoot_steps = 0;
  std::size_t best_generation = 0;
  std::size_t best_process = 0;
  std::uint64_t best_evaluation = 0;
};

struct RunResult {
  RunConfig config;
  std::vector<RunRow> rows;             // this invocation only (resume starts mid-run)
  std::vector<double> row_wall_seconds;  // aligned with rows
  RunSummary summary;
  Eigen::VectorXd best_x;
  bool halted = false;  // stopped by run.stop_after_generation
  double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Serialization

inline ordered_json to_json(const RunRow& r) {
  ordered_json j;
  j["type"] = "row";
  j["generation"] = r.generation;
  j["process_id"] = r.process_id;
  j["fitness"] = r.fitness;
  j["sigma"] = r.sigma;
  j["accepted"] = r.accepted;
  j["membership"] = r.membership ? ordered_json(*r.membership) : ordered_json(nullptr);
  j["chosen"] = r.chosen;
  j["memberships"] = r.memberships;
  j["steps_used"] = r.steps_used;
  j["embedding_seed"] = r.embedding_seed;
  return j;
}

inline ordered_json to_json(const RunSummary& s) {
  ordered_json j;
  j["type"] = "summary";
  j["best_fitness"] = s.best_fitness;
  j["test_score"] = s.test_score;
  j["test_returns"] = s.test_returns;
  j["generations"] = s.generations;
  j["evaluations"] = s.evaluations;
  j["steps_used"] = s.steps_used;
  j["overshoot_steps"] = s.overshoot_steps;
  j["best_generation"] = s.best_generation;
  j["best_process"] = s.best_process;
  j["best_evaluation"] = s.best_evaluation;
  return j;
}

inline ordered_json vector_json(const Eigen::VectorXd& v) {
  return ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const ordered_json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Everything needed to continue a run exactly where it stopped.
struct Checkpoint {
  RunConfig config;
  EngineState state;
  std::vector<std::pair<EvaluationRecord, Eigen::VectorXd>> archive;  // oldest first
  std::uint64_t archive_next_sequence = 0;
  std::uint64_t log_bytes = 0;
  std::uint64_t trace_bytes = 0;
};

inline ordered_json to_json(const Checkpoint& c) {
  ordered_json j;
  j["version"] = 1;
  j["config"] = c.config.to_text();
  j["generation"] = c.state.generation;
  j["steps_used"] = c.state.steps_used;
  j["evaluations"] = c.state.evaluations;
  j["processes"] = ordered_json::array();
  for (const auto& p : c.state.processes) {
    ordered_json pj;
    pj["id"] = p.id;
    pj["x"] = vector_json(p.x);
    pj["sigma"] = p.sigma;
    pj["fitness"] = p.fitness;
    pj["success_count"] = p.success_count;
    pj["iter_in_epoch"] = p.iter_in_epoch;
    pj["rng"] = {p.rng.sample.state(), p.rng.embedding.state(), p.rng.select.state(),
                 p.rng.episodes.state()};
    j["processes"].push_back(std::move(pj));
  }
  j["best"] = {{"x", vector_json(c.state.best.x)},
               {"fitness", c.state.best.fitness},
               {"generation", c.state.best.generation},
               {"process_id", c.state.best.process_id},
               {"evaluation", c.state.best.evaluation}};
  j["embedded_archive"] = ordered_json::array();
  for (const auto& [seq, y] : c.state.embedded_archive)
    j["embedded_archive"].push_back({{"sequence", seq}, {"y", vector_json(y)}});
  j["archive_next_sequence"] = c.archive_next_sequence;
  j["archive"] = ordered_json::array();
  for (const auto& [rec, x] : c.archive)
    j["archive"].push_back({{"fitness", rec.fitness},
                            {"generation", rec.generation},
                            {"process_id", rec.process_id},
                            {"sequence", rec.sequence},
                            {"x", vector_json(x)}});
  j["log_bytes"] = c.log_bytes;
  j["trace_bytes"] = c.trace_bytes;
  return j;
}

inline Checkpoint checkpoint_from_json(const ordered_json& j) {
  if (j.at("version").get<int>() != 1) throw InputError("unsupported checkpoint version");
  Checkpoint c;
  c.config = RunConfig::parse(j.at("config").get<std::string>());
  c.state.generation = j.at("generation").get<std::size_t>();
  c.state.steps_used = j.at("steps_used").get<std::uint64_t>();
  c.state.evaluations = j.at("evaluations").get<std::uint64_t>();
  for (const auto& pj : j.at("processes")) {
    SearchProcess p;
    p.id = pj.at("id").get<std::size_t>();
    p.x = vector_from_json(pj.at("x"));
    p.sigma = pj.at("sigma").get<double>();
    p.fitness = pj.at("fitness").get<double>();
    p.success_count = pj.at("success_count").get<std::size_t>();
    p.iter_in_epoch = pj.at("iter_in_epoch").get<std::size_t>();
    const auto& r = pj.at("rng");
    p.rng.sample.set_state(r.at(0).get<std::uint64_t>());
    p.rng.embedding.set_state(r.at(1).get<std::uint64_t>());
    p.rng.select.set_state(r.at(2).get<std::uint64_t>());
    p.rng.episodes.set_state(r.at(3).get<std::uint64_t>());
    c.state.processes.push_back(std::move(p));
  }
  const auto& b = j.at("best");
  c.state.best.x = vector_from_json(b.at("x"));
  c.state.best.fitness = b.at("fitness").get<double>();
  c.state.best.generation = b.at("generation").get<std::size_t>();
  c.state.best.process_id = b.at("process_id").get<std::size_t>();
  c.state.best.evaluation = b.at("evaluation").get<std::uint64_t>();
  for (const auto& ej : j.at("embedded_archive"))
    c.state.embedded_archive.emplace_back(ej.at("sequence").get<std::uint64_t>(),
                                          vector_from_json(ej.at("y")));
  c.archive_next_sequence = j.at("archive_next_sequence").get<std::uint64_t>();
  for (const auto& rj : j.at("archive")) {
    EvaluationRecord rec{rj.at("fitness").get<double>(), rj.at("generation").get<std::size_t>(),
                         rj.at("process_id").get<std::size_t>(),
                         rj.at("sequence").get<std::uint64_t>()};
    c.archive.emplace_back(rec, vector_from_json(rj.at("x")));
  }
  c.log_bytes = j.at("log_bytes").get<std::uint64_t>();
  c.trace_bytes = j.at("trace_bytes").get<std::uint64_t>();
  return c;
}

inline std::vector<std::pair<EvaluationRecord, Eigen::VectorXd>> archive_contents(
    const EvaluationArchive& a) {
  std::vector<std::pair<EvaluationRecord, Eigen::VectorXd>> out;
  for (std::size_t slot : a.ordered_slots()) out.emplace_back(a.records()[slot], a.point(slot));
  return out;
}

inline void write_checkpoint(const std::string& path, const Checkpoint& c) {
  const auto bytes = ordered_json::to_cbor(to_json(c));
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return checkpoint_from_json(ordered_json::from_cbor(bytes));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt checkpoint " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

/// Append-only log files of one run directory. Inert without a directory.
class RunFiles {
 public:
  RunFiles() = default;

  static RunFiles create(const std::string& dir, const RunConfig& cfg) {
    RunFiles f;
    if (dir.empty()) return f;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    f.dir_ = dir;
    {
      std::ofstream c(dir + "/config.txt", std::ios::trunc);
      c << cfg.to_text();
      if (!c) throw IoError("cannot write " + dir + "/config.txt");
    }
    f.open(std::ios::trunc);
    std::string header = "generation\tevaluations\tsteps_used\tbest_fitness";
    for (std::size_t i = 0; i < cfg.search.ncs.lambda; ++i) header += "\tsigma_" + std::to_string(i);
    f.trace_ << header << '\n';
    return f;
  }

  static RunFiles reopen(const std::string& dir, std::uint64_t log_bytes,
                         std::uint64_t trace_bytes) {
    RunFiles f;
    f.dir_ = dir;
    std::error_code ec;
    std::filesystem::resize_file(dir + "/log.jsonl", log_bytes, ec);
    if (!ec) std::filesystem::resize_file(dir + "/trace.tsv", trace_bytes, ec);
    if (ec) throw IoError("cannot truncate logs in " + dir + ": " + ec.message());
    f.open(std::ios::app);
    return f;
  }

  bool active() const { return !dir_.empty(); }
  const std::string& dir() const { return dir_; }

  void row(const RunRow& r) {
    if (active()) log_ << to_json(r).dump() << '\n';
  }
  void summary(const RunSummary& s) {
    if (active()) log_ << to_json(s).dump() << '\n';
  }
  void trace(std::size_t generation, std::uint64_t evaluations, std::uint64_t steps, double best,
             std::span<const SearchProcess> procs) {
    if (!active()) return;
    trace_ << generation << '\t' << evaluations << '\t' << steps << '\t'
           << format_double(best);
    for (const auto& p : procs) trace_ << '\t' << format_double(p.sigma);
    trace_ << '\n';
  }

  /// Flush and report byte offsets for a checkpoint.
  std::pair<std::uint64_t, std::uint64_t> flush() {
    if (!active()) return {0, 0};
    log_.flush();
    trace_.flush();
    if (!log_ || !trace_) throw IoError("write failure in " + dir_);
    return {static_cast<std::uint64_t>(log_.tellp()), static_cast<std::uint64_t>(trace_.tellp())};
  }

  void write_text(const std::string& name, const std::string& text) {
    if (!active()) return;
    std::ofstream out(dir_ + "/" + name, std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + dir_ + "/" + name);
  }

 private:
  static std::string format_double(double v) { return pesaerl::detail::format_double(v); }

  void open(std::ios::openmode mode) {
    log_.open(dir_ + "/log.jsonl", std::ios::out | mode);
    trace_.open(dir_ + "/trace.tsv", std::ios::out | mode);
    if (!log_ || !trace_) throw IoError("cannot open logs in " + dir_);
  }

  std::string dir_;
  std::ofstream log_;
  std::ofstream trace_;
};

inline RunRow make_row(std::size_t generation, const ProcessReport& p) {
  RunRow r;
  r.generation = generation;
  r.process_id = p.process_id;
  r.fitness = p.fitness;
  r.sigma = p.sigma;
  r.accepted = p.accepted;
  if (p.surrogate_active) r.membership = p.memberships.at(p.chosen);
  r.chosen = p.chosen;
  r.memberships = p.memberships;
  r.steps_used = p.steps_used;
  r.embedding_seed = p.embedding_seed;
  return r;
}

inline Checkpoint snapshot(const RunConfig& cfg, const PolicySearch& search, RunFiles& files) {
  Checkpoint c;
  c.config = cfg;
  c.state = search.state();
  c.archive = archive_contents(search.archive());
  c.archive_next_sequence = search.archive().next_sequence();
  std::tie(c.log_bytes, c.trace_bytes) = files.flush();
  return c;
}

inline void save(const RunConfig& cfg, const PolicySearch& search, RunFiles& files) {
  if (!files.active()) return;
  write_checkpoint(files.dir() + "/checkpoint.cbor", snapshot(cfg, search, files));
}

using Clock = std::chrono::steady_clock;

inline void record(RunResult& result, RunFiles& files, const GenerationReport& rep,
                   Clock::time_point start) {
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  for (const auto& p : rep.processes) {
    result.rows.push_back(make_row(rep.generation, p));
    result.row_wall_seconds.push_back(wall);
    files.row(result.rows.back());
  }
}

/// Generation loop shared by fresh and resumed runs.
inline void drive(const RunConfig& cfg, const Evaluator& evaluator, PolicySearch& search,
                  FitnessBudget& budget, RunFiles& files, RunResult& result,
                  Clock::time_point start) {
  try {
    for (;;) {
      if (cfg.stop_after_generation && search.generation() >= cfg.stop_after_generation) {
        save(cfg, search, files);
        result.halted = true;
        return;
      }
      auto rep = search.step();
      if (!rep) break;
      record(result, files, *rep, start);
      files.trace(search.generation(), budget.evaluations(), budget.steps_used(),
                  search.best().fitness, search.processes());
      if (cfg.checkpoint_every && search.generation() % cfg.checkpoint_every == 0)
        save(cfg, search, files);
    }
  } catch (const IoError&) {
    try {
      save(cfg, search, files);
    } catch (...) {
    }
    throw;
  }

  const BestPolicy& best = search.best();
  SplitMix64 test_rng = make_stream(cfg.search.seed, "test");
  const EpisodeBatch test = evaluator.rollout(
      std::span<const double>(best.x.data(), static_cast<std::size_t>(best.x.size())),
      cfg.test_episodes, test_rng);

  RunSummary& s = result.summary;
  s.best_fitness = best.fitness;
  s.test_score = test.mean;
  s.test_returns = test.returns;
  s.generations = search.generation();
  s.evaluations = budget.evaluations();
  s.steps_used = budget.steps_used();
  s.overshoot_steps = budget.steps_used() > budget.max_steps()
                          ? budget.steps_used() - budget.max_steps()
                          : 0;
  s.best_generation = best.generation;
  s.best_process = best.process_id;
  s.best_evaluation = best.evaluation;
  result.best_x = best.x;
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();

  files.summary(s);
  if (files.active()) {
    save(cfg, search, files);
    ordered_json bp;
    bp["env"] = evaluator.name();
    bp["dimension"] = best.x.size();
    bp["fitness"] = best.fitness;
    bp["test_score"] = test.mean;
    bp["weights"] = vector_json(best.x);
    files.write_text("best_policy.json", bp.dump() + "\n");
    files.write_text("timing.json",
                     ordered_json{{"wall_seconds", result.wall_seconds}}.dump() + "\n");
    if (cfg.log_archive) {
      std::string lines;
      for (const auto& [rec, x] : archive_contents(search.archive()))
        lines += ordered_json{{"generation", rec.generation},
                              {"process_id", rec.process_id},
                              {"fitness", rec.fitness}}
                     .dump() +
                 "\n";
      files.write_text("archive.jsonl", lines);
    }
    files.flush();
  }
}

}  // namespace detail

inline std::string output_dir_override(const RunConfig& cfg) {
  if (const char* env = std::getenv("PESAERL_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

/// Initialize, then step until the budget is exhausted; finally score the
/// best policy over `env.test_episodes` episodes. Deterministic in
/// (config, seed).
inline RunResult run(RunConfig cfg) {
  cfg.validate();
  const auto start = detail::Clock::now();
  const auto evaluator = cfg.make_evaluator();
  FitnessBudget budget(cfg.max_steps);
  PolicySearch search(cfg.search, *evaluator, budget);
  auto files = detail::RunFiles::create(cfg.output_dir, cfg);

  RunResult result;
  result.config = cfg;
  const GenerationReport init = search.initialize();
  detail::record(result, files, init, start);
  files.trace(0, budget.evaluations(), budget.steps_used(), search.best().fitness,
              search.processes());
  detail::drive(cfg, *evaluator, search, budget, files, result, start);
  return result;
}

/// Continue the run whose checkpoint lives in `dir`.
inline RunResult resume(const std::string& dir) {
  Checkpoint c = read_checkpoint(dir + "/checkpoint.cbor");
  RunConfig cfg = c.config;
  cfg.stop_after_generation = 0;
  cfg.output_dir = dir;
  cfg.validate();
  const auto start = detail::Clock::now();
  const auto evaluator = cfg.make_evaluator();
  FitnessBudget budget(cfg.max_steps);
  PolicySearch search(cfg.search, *evaluator, budget);
  EvaluationArchive archive(cfg.search.fcps.capacity, evaluator->dimension());
  archive.restore(std::move(c.archive), c.archive_next_sequence);
  search.restore(std::move(c.state), std::move(archive));
  auto files = detail::RunFiles::reopen(dir, c.log_bytes, c.trace_bytes);

  RunResult result;
  result.config = cfg;
  detail::drive(cfg, *evaluator, search, budget, files, result, start);
  return result;
}

/// Re-score a policy vector over `episodes` test episodes.
inline EpisodeBatch rescore(const RunConfig& cfg, std::span<const double> weights,
                            std::size_t episodes) {
  const auto evaluator = cfg.make_evaluator();
  if (weights.size() != evaluator->dimension())
    throw InputError("policy has " + std::to_string(weights.size()) + " weights, environment needs " +
                     std::to_string(evaluator->dimension()));
  SplitMix64 rng = make_stream(cfg.search.seed, "test");
  return evaluator->rollout(weights, episodes, rng);
}

// ---------------------------------------------------------------------------
// Sweeps and comparisons

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  a.median = median_of(v);
  a.min = *std::min_element(v.begin(), v.end());
  a.max = *std::max_element(v.begin(), v.end());
  return a;
}

struct SweepEntry {
  std::string value;
  std::vector<double> test_scores;  // one per repeat, in seed order
  Aggregate stats;
};

/// `repeat` runs per value with seeds base.seed + run index.
inline std::vector<SweepEntry> sweep(const RunConfig& base, const std::string& parameter,
                                     const std::vector<std::string>& values) {
  const auto names = RunConfig::field_names();
  if (std::find(names.begin(), names.end(), parameter) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown sweep parameter '" + parameter + "'; valid names: " + list);
  }
  std::vector<SweepEntry> out;
  for (const auto& value : values) {
    SweepEntry e;
    e.value = value;
    for (std::size_t r = 0; r < base.repeat; ++r) {
      RunConfig cfg = base;
      cfg.set(parameter, value);
      cfg.search.seed = base.search.seed + r;
      if (!base.output_dir.empty())
        cfg.output_dir = base.output_dir + "/" + parameter + "=" + value + "/run_" + std::to_string(r);
      e.test_scores.push_back(run(cfg).summary.test_score);
    }
    e.stats = aggregate(e.test_scores);
    out.push_back(std::move(e));
  }
  return out;
}

/// First 1-based evaluation whose training fitness reaches `target`, with
/// the wall time at which it was logged.
struct TargetHit {
  std::optional<std::uint64_t> evaluations;
  std::optional<double> wall_seconds;
};

inline TargetHit first_hit(const RunResult& r, double target) {
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    if (r.rows[i].fitness >= target)
      return {i + 1, r.row_wall_seconds.empty() ? std::nullopt
                                                : std::optional<double>(r.row_wall_seconds[i])};
  return {};
}

struct ComparePair {
  std::uint64_t seed = 0;
  TargetHit a;
  TargetHit b;
  std::optional<double> ratio;  // evaluations(a) / evaluations(b); > 1 means b is faster
};

struct CompareReport {
  double target = 0.0;
  std::vector<ComparePair> pairs;
  std::optional<double> median_ratio;  // over pairs where both reached
  std::size_t b_not_slower = 0;        // pairs where b reached with <= a's evaluations
};

/// Evaluations-to-target from existing runs, matched by position.
inline CompareReport compare_results(const std::vector<RunResult>& a,
                                     const std::vector<RunResult>& b, double target) {
  if (a.size() != b.size()) throw ContractError("compare: run counts differ");
  CompareReport rep;
  rep.target = target;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ComparePair p;
    p.seed = a[i].config.search.seed;
    p.a = first_hit(a[i], target);
    p.b = first_hit(b[i], target);
    if (p.a.evaluations && p.b.evaluations) {
      p.ratio = static_cast<double>(*p.a.evaluations) / static_cast<double>(*p.b.evaluations);
      ratios.push_back(*p.ratio);
    }
    if (p.b.evaluations && (!p.a.evaluations || *p.b.evaluations <= *p.a.evaluations))
      ++rep.b_not_slower;
    rep.pairs.push_back(p);
  }
  if (!ratios.empty()) rep.median_ratio = median_of(ratios);
  return rep;
}

/// Run both configurations on `repeats` matched seeds (cfg_a.seed + i).
inline CompareReport compare(const RunConfig& cfg_a, const RunConfig& cfg_b, double target,
                             std::size_t repeats) {
  if (cfg_a.env != cfg_b.env || cfg_a.dimension() != cfg_b.dimension() ||
      cfg_a.search.bounds != cfg_b.search.bounds || cfg_a.max_steps != cfg_b.max_steps ||
      cfg_a.env_dim != cfg_b.env_dim || cfg_a.effective_dim != cfg_b.effective_dim ||
      cfg_a.rotation_seed != cfg_b.rotation_seed)
    throw ConfigError("compare: configurations must share environment, bounds and budget");
  std::vector<RunResult> ra, rb;
  for (std::size_t i = 0; i < repeats; ++i) {
    RunConfig a = cfg_a, b = cfg_b;
    a.search.seed = b.search.seed = cfg_a.search.seed + i;
    if (!cfg_a.output_dir.empty()) a.output_dir = cfg_a.output_dir + "/a/run_" + std::to_string(i);
    if (!cfg_b.output_dir.empty()) b.output_dir = cfg_b.output_dir + "/b/run_" + std::to_string(i);
    ra.push_back(run(a));
    rb.push_back(run(b));
  }
  return compare_results(ra, rb, target);
}

inline ordered_json to_json(const CompareReport& r) {
  ordered_json j;
  j["target"] = r.target;
  j["pairs"] = ordered_json::array();
  auto opt = [](const auto& o) { return o ? ordered_json(*o) : ordered_json("not reached"); };
  for (const auto& p : r.pairs)
    j["pairs"].push_back({{"seed", p.seed},
                          {"evaluations_a", opt(p.a.evaluations)},
                          {"evaluations_b", opt(p.b.evaluations)},
                          {"wall_seconds_a", opt(p.a.wall_seconds)},
                          {"wall_seconds_b", opt(p.b.wall_seconds)},
                          {"ratio", opt(p.ratio)}});
  j["median_ratio"] = r.median_ratio ? ordered_json(*r.median_ratio) : ordered_json(nullptr);
  j["b_not_slower"] = r.b_not_slower;
  return j;
}

inline ordered_json to_json(const std::vector<SweepEntry>& entries, const std::string& parameter) {
  ordered_json j;
  j["parameter"] = parameter;
  j["values"] = ordered_json::array();
  for (const auto& e : entries)
    j["values"].push_back({{"value", e.value},
                           {"test_scores", e.test_scores},
                           {"mean", e.stats.mean},
                           {"median", e.stats.median},
                           {"min", e.stats.min},
                           {"max", e.stats.max}});
  return j;
}

}  // namespace pesaerl
