// Command-line front end.
//
//   pesaerl run     [--config FILE] [--<key> VALUE ...]
//   pesaerl sweep   --param KEY --values V1,V2,... [--config FILE] [--<key> VALUE ...]
//   pesaerl compare --config-a FILE --config-b FILE --target T [--repeats N]
//   pesaerl resume  --dir RUN_DIR
//   pesaerl test    --dir RUN_DIR [--episodes N]
//
// Every config key is accepted as a flag (e.g. --ncs.lambda 6). Flags override
// the config file; PESAERL_OUTPUT_DIR overrides run.output_dir. Results go
// to stdout as JSON. On failure a one-line JSON object with the error
// category is written to stderr and the exit code identifies the category.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pesaerl/pesaerl.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "Key = value config file");
    for (const auto& f : pesaerl::RunConfig::fields())
      cmd.add_option("--" + f.name, values[f.name], f.help);
  }

  pesaerl::RunConfig build() const {
    pesaerl::RunConfig cfg =
        config_path.empty() ? pesaerl::RunConfig{} : pesaerl::RunConfig::load(config_path);
    for (const auto& [key, value] : values)
      if (!value.empty()) cfg.set(key, value);
    cfg.output_dir = pesaerl::output_dir_override(cfg);
    return cfg;
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int fail(std::string_view category, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", category}, {"message", message}}.dump() << '\n';
  return code;
}

nlohmann::ordered_json summary_json(const pesaerl::RunResult& r) {
  auto j = pesaerl::to_json(r.summary);
  j["halted"] = r.halted;
  j["output_dir"] = r.config.output_dir;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted negatively correlated search with random embedding"};
  app.require_subcommand(1);

  Overrides run_opts, sweep_opts, test_opts;

  auto* run_cmd = app.add_subcommand("run", "Run one search to budget exhaustion");
  run_opts.attach(*run_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "Grid sweep over one config key");
  std::string sweep_param, sweep_values;
  sweep_cmd->add_option("--param", sweep_param, "Config key to vary")->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep_opts.attach(*sweep_cmd);

  auto* compare_cmd = app.add_subcommand("compare", "Evaluations-to-target of two configs");
  std::string config_a, config_b;
  double target = 0.0;
  std::size_t repeats = 10;
  compare_cmd->add_option("--config-a", config_a, "Baseline config file")->required();
  compare_cmd->add_option("--config-b", config_b, "Candidate config file")->required();
  compare_cmd->add_option("--target", target, "Target training fitness")->required();
  compare_cmd->add_option("--repeats", repeats, "Matched seeds");

  auto* resume_cmd = app.add_subcommand("resume", "Continue a checkpointed run");
  std::string resume_dir;
  resume_cmd->add_option("--dir", resume_dir, "Run directory")->required();

  auto* test_cmd = app.add_subcommand("test", "Re-score the best policy of a run");
  std::string test_dir;
  std::size_t episodes = 30;
  test_cmd->add_option("--dir", test_dir, "Run directory")->required();
  test_cmd->add_option("--episodes", episodes, "Test episodes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", e.what(), pesaerl::exit_code(pesaerl::ErrorCategory::config));
  }

  try {
    if (*run_cmd) {
      const auto result = pesaerl::run(run_opts.build());
      std::cout << summary_json(result).dump() << '\n';
    } else if (*sweep_cmd) {
      const auto entries =
          pesaerl::sweep(sweep_opts.build(), sweep_param, split(sweep_values, ','));
      std::cout << pesaerl::to_json(entries, sweep_param).dump() << '\n';
    } else if (*compare_cmd) {
      auto a = pesaerl::RunConfig::load(config_a);
      auto b = pesaerl::RunConfig::load(config_b);
      if (const std::string dir = pesaerl::output_dir_override(a); !dir.empty())
        a.output_dir = b.output_dir = dir;
      std::cout << pesaerl::to_json(pesaerl::compare(a, b, target, repeats)).dump() << '\n';
    } else if (*resume_cmd) {
      std::cout << summary_json(pesaerl::resume(resume_dir)).dump() << '\n';
    } else if (*test_cmd) {
      const auto cfg = pesaerl::RunConfig::load(test_dir + "/config.txt");
      std::ifstream in(test_dir + "/best_policy.json");
      if (!in) throw pesaerl::IoError("cannot read " + test_dir + "/best_policy.json");
      nlohmann::json policy;
      try {
        policy = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw pesaerl::InputError(std::string("malformed best_policy.json: ") + e.what());
      }
      const auto weights = policy.at("weights").get<std::vector<double>>();
      const auto batch = pesaerl::rescore(cfg, weights, episodes);
      std::cout << nlohmann::ordered_json{{"episodes", episodes},
                                          {"mean", batch.mean},
                                          {"returns", batch.returns}}
                       .dump()
                << '\n';
    }
  } catch (const pesaerl::Error& e) {
    return fail(pesaerl::category_name(e.category()), e.what(), pesaerl::exit_code(e.category()));
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
