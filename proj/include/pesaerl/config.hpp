#pragma once

// Run configuration: a flat key = value document.
//
//   # comment
//   ncs.lambda = 6
//   env.name = effective_sphere
//
// Every key is listed in `RunConfig::fields()`; unknown keys are rejected.
// Defaults: lambda 6, d 100, epoch 5, r 1.2, M 3, phi 1.0, bounds
// [-0.1, 0.1].

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pesaerl/environments.hpp"
#include "pesaerl/errors.hpp"
#include "pesaerl/ncs.hpp"
#include "pesaerl/policy.hpp"

namespace pesaerl {

struct RunConfig {
  SearchConfig search;

  std::string env = "effective_sphere";  // effective_sphere | cartpole
  std::size_t env_dim = 1000;
  std::size_t effective_dim = 10;
  std::uint64_t rotation_seed = 7;
  std::string network = "input 4; dense 4 32 relu; dense 32 2 none";
  std::size_t max_episode_steps = 500;
  std::size_t test_episodes = 30;

  std::uint64_t max_steps = 20000;
  std::size_t repeat = 1;
  std::string output_dir;  // empty: keep everything in memory
  std::size_t checkpoint_every = 0;
  std::size_t stop_after_generation = 0;  // 0: run to budget exhaustion
  bool log_archive = false;

  struct Field {
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
  };

  static const std::vector<Field>& fields();

  static std::vector<std::string> field_names() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
  }

  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Every field as `key = value` lines, in registry order.
  std::string to_text() const {
    std::string out;
    for (const auto& f : fields()) out += f.name + " = " + f.get(*this) + "\n";
    return out;
  }

  static RunConfig parse(std::string_view text) {
    RunConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  std::size_t dimension() const {
    if (env == "cartpole") return param_count(parse_network(network));
    return env_dim;
  }

  std::unique_ptr<Evaluator> make_evaluator() const {
    if (env == "cartpole") {
      CartPoleParams p;
      p.max_steps = max_episode_steps;
      return std::make_unique<CartPoleEvaluator>(parse_network(network), p);
    }
    if (env == "effective_sphere")
      return std::make_unique<SphereEvaluator>(env_dim, effective_dim, rotation_seed);
    throw ConfigError("unknown env.name '" + env + "' (expected cartpole or effective_sphere)");
  }

  void validate() const {
    if (env != "cartpole" && env != "effective_sphere")
      throw ConfigError("unknown env.name '" + env + "' (expected cartpole or effective_sphere)");
    if (env == "effective_sphere" && (effective_dim < 1 || effective_dim > env_dim))
      throw ConfigError("env.effective_dim must lie in [1, env.dim]");
    if (max_episode_steps < 1) throw ConfigError("env.max_episode_steps must be >= 1");
    if (test_episodes < 1) throw ConfigError("env.test_episodes must be >= 1");
    if (repeat < 1) throw ConfigError("run.repeat must be >= 1");
    search.validate(dimension());
  }
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  std::from_chars_result res;
  if constexpr (std::is_floating_point_v<T>) {
    res = std::from_chars(v.data(), end, out, std::chars_format::general);
  } else {
    res = std::from_chars(v.data(), end, out);
  }
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for " + std::string(key));
}

/// Shortest text that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline const std::vector<RunConfig::Field>& RunConfig::fields() {
  using detail::format_double;
  using detail::parse_bool;
  using detail::parse_number;
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    auto add_size = [&](std::string name, std::string help, auto member) {
      t.push_back({name, std::move(help),
                   [member](const RunConfig& c) { return std::to_string(member(c)); },
                   [member, name](RunConfig& c, std::string_view v) {
                     member(c) = parse_number<std::remove_reference_t<decltype(member(c))>>(name, v);
                   }});
    };
    auto add_real = [&](std::string name, std::string help, auto member) {
      t.push_back({name, std::move(help),
                   [member](const RunConfig& c) { return format_double(member(c)); },
                   [member, name](RunConfig& c, std::string_view v) {
                     member(c) = parse_number<double>(name, v);
                   }});
    };
    auto add_bool = [&](std::string name, std::string help, auto member) {
      t.push_back({name, std::move(help),
                   [member](const RunConfig& c) { return member(c) ? "true" : "false"; },
                   [member, name](RunConfig& c, std::string_view v) {
                     member(c) = parse_bool(name, v);
                   }});
    };
    auto add_text = [&](std::string name, std::string help, auto member) {
      t.push_back({name, std::move(help), [member](const RunConfig& c) { return member(c); },
                   [member](RunConfig& c, std::string_view v) { member(c) = std::string(v); }});
    };
// Member accessors usable on both const and mutable configs.
#define PESAERL_MEMBER(expr) [](auto& c) -> auto& { return c.expr; }

    add_size("seed", "master seed", PESAERL_MEMBER(search.seed));
    add_size("ncs.lambda", "number of search processes", PESAERL_MEMBER(search.ncs.lambda));
    add_size("ncs.epoch", "iterations between step-size updates", PESAERL_MEMBER(search.ncs.epoch));
    add_real("ncs.r", "step-size multiplier (> 1)", PESAERL_MEMBER(search.ncs.r));
    add_real("ncs.phi", "fitness/diversity trade-off", PESAERL_MEMBER(search.ncs.phi));
    add_size("ncs.m", "candidates sampled per iteration", PESAERL_MEMBER(search.ncs.candidates));
    add_real("ncs.sigma0", "initial step size", PESAERL_MEMBER(search.ncs.sigma0));
    add_bool("ncs.normalize_fd", "normalize fitness and diversity before combining",
             PESAERL_MEMBER(search.ncs.normalize_fd));
    add_size("embedding.d", "embedded dimension", PESAERL_MEMBER(search.embedded_dim));
    t.push_back({"embedding.fixed", "reuse one embedding for the whole run",
                 [](const RunConfig& c) {
                   return c.search.embedding_mode == EmbeddingMode::fixed ? "true" : "false";
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.search.embedding_mode = parse_bool("embedding.fixed", v)
                                                 ? EmbeddingMode::fixed
                                                 : EmbeddingMode::per_iteration;
                 }});
    add_bool("embedding.sample_in_subspace", "sample candidates directly in the embedded box",
             PESAERL_MEMBER(search.sample_in_subspace));
    add_size("embedding.dense_limit", "largest D stored densely",
             PESAERL_MEMBER(search.dense_limit));
    add_bool("pe.bypass", "skip the embedding (identity map)",
             PESAERL_MEMBER(search.bypass_embedding));
    add_bool("surrogate.enabled", "use fuzzy pre-selection", PESAERL_MEMBER(search.surrogate));
    add_size("surrogate.k", "neighbors", PESAERL_MEMBER(search.fcps.k));
    add_real("surrogate.fuzzifier", "fuzzy k-NN exponent parameter (> 1)",
             PESAERL_MEMBER(search.fcps.fuzzifier));
    add_size("surrogate.min_archive", "archive size that activates the surrogate",
             PESAERL_MEMBER(search.fcps.min_archive));
    add_real("surrogate.label_split", "fraction labeled promising",
             PESAERL_MEMBER(search.fcps.label_split));
    add_size("surrogate.capacity", "archive capacity", PESAERL_MEMBER(search.fcps.capacity));
    t.push_back({"surrogate.selection", "argmax | top_quantile",
                 [](const RunConfig& c) {
                   return c.search.fcps.rule == SelectionRule::argmax ? "argmax" : "top_quantile";
                 },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "argmax")
                     c.search.fcps.rule = SelectionRule::argmax;
                   else if (v == "top_quantile")
                     c.search.fcps.rule = SelectionRule::top_quantile;
                   else
                     throw ConfigError("surrogate.selection must be argmax or top_quantile");
                 }});
    add_real("surrogate.top_quantile", "pool fraction for top_quantile selection",
             PESAERL_MEMBER(search.fcps.top_quantile));
    add_real("bounds.low", "lower bound (init and embedded box)", PESAERL_MEMBER(search.bounds.low));
    add_real("bounds.high", "upper bound (init and embedded box)",
             PESAERL_MEMBER(search.bounds.high));
    add_size("budget.max_steps", "environment-step budget", PESAERL_MEMBER(max_steps));
    add_text("env.name", "cartpole | effective_sphere", PESAERL_MEMBER(env));
    add_size("env.dim", "sphere dimension D", PESAERL_MEMBER(env_dim));
    add_size("env.effective_dim", "sphere effective dimension", PESAERL_MEMBER(effective_dim));
    add_size("env.rotation_seed", "sphere rotation seed", PESAERL_MEMBER(rotation_seed));
    add_text("env.network", "policy network schema", PESAERL_MEMBER(network));
    add_size("env.max_episode_steps", "episode length limit", PESAERL_MEMBER(max_episode_steps));
    add_size("env.train_episodes", "episodes per training evaluation",
             PESAERL_MEMBER(search.train_episodes));
    add_size("env.test_episodes", "episodes for the final test score",
             PESAERL_MEMBER(test_episodes));
    add_size("run.repeat", "seeded repetitions for sweep/compare", PESAERL_MEMBER(repeat));
    add_text("run.output_dir", "log directory (empty: none)", PESAERL_MEMBER(output_dir));
    add_size("run.workers", "concurrent process bodies", PESAERL_MEMBER(search.workers));
    add_size("run.checkpoint_every", "generations between checkpoints (0: never)",
             PESAERL_MEMBER(checkpoint_every));
    add_size("run.stop_after_generation", "halt with a checkpoint after this generation",
             PESAERL_MEMBER(stop_after_generation));
    add_bool("run.log_archive", "dump the archive at the end", PESAERL_MEMBER(log_archive));
#undef PESAERL_MEMBER
    return t;
  }();
  return table;
}

inline void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : fields())
    if (f.name == key) return f.set(*this, value);
  std::string names;
  for (const auto& f : fields()) names += (names.empty() ? "" : ", ") + f.name;
  throw ConfigError("unknown config key '" + std::string(key) + "'; valid keys: " + names);
}

inline std::string RunConfig::get(std::string_view key) const {
  for (const auto& f : fields())
    if (f.name == key) return f.get(*this);
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace pesaerl
