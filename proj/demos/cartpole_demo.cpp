// Train a 4-32-2 policy on cart-pole and replay the best policy.

#include <cstdio>
#include <cstdlib>

#include "pesaerl/pesaerl.hpp"

int main(int argc, char** argv) {
  pesaerl::RunConfig cfg;
  cfg.env = "cartpole";
  cfg.max_steps = 100000;
  cfg.search.seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 0;

  const auto r = pesaerl::run(cfg);
  std::printf("generations %zu  evaluations %llu  steps %llu\n", r.summary.generations,
              static_cast<unsigned long long>(r.summary.evaluations),
              static_cast<unsigned long long>(r.summary.steps_used));
  std::printf("best training return %.1f  test mean %.1f over %zu episodes\n",
              r.summary.best_fitness, r.summary.test_score, r.summary.test_returns.size());
}
