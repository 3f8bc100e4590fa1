#pragma once

// Fitness backends: a cart-pole control task driven by a policy network and
// a high-dimensional sphere whose value depends on a few coordinates only.
// Both sit behind the Evaluator interface; all fitness is maximized.

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "pesaerl/errors.hpp"
#include "pesaerl/policy.hpp"
#include "pesaerl/random.hpp"

namespace pesaerl {

// ---------------------------------------------------------------------------
// Budget

/// Environment-step budget shared by all evaluation workers.
class FitnessBudget {
 public:
  explicit FitnessBudget(std::uint64_t max_steps) : max_steps_(max_steps) {}

  std::uint64_t max_steps() const { return max_steps_; }
  std::uint64_t steps_used() const { return steps_.load(); }
  std::uint64_t evaluations() const { return evaluations_.load(); }
  bool exhausted() const { return steps_.load() >= max_steps_; }

  void charge(std::uint64_t steps) {
    steps_.fetch_add(steps);
    evaluations_.fetch_add(1);
  }

  void restore(std::uint64_t steps, std::uint64_t evaluations) {
    steps_.store(steps);
    evaluations_.store(evaluations);
  }

 private:
  std::uint64_t max_steps_;
  std::atomic<std::uint64_t> steps_{0};
  std::atomic<std::uint64_t> evaluations_{0};
};

// ---------------------------------------------------------------------------
// Cart-pole

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force = 10.0;
  double tau = 0.02;
  double x_threshold = 2.4;
  double theta_threshold = 12.0 * 2.0 * std::numbers::pi / 360.0;
  std::size_t max_steps = 500;
};

using CartPoleState = std::array<double, 4>;  // x, x_dot, theta, theta_dot

struct StepResult {
  CartPoleState state{};
  double reward = 0.0;
  bool terminal = false;
};

/// One explicit-Euler step of the classic cart-pole dynamics. `terminal`
/// reflects only the position/angle limits; the episode length limit is
/// enforced by CartPole.
inline StepResult cartpole_step(const CartPoleState& s, std::size_t action,
                                const CartPoleParams& p = {}) {
  if (action > 1) throw InputError("cart-pole action must be 0 or 1");
  for (double v : s)
    if (!std::isfinite(v)) throw InputError("cart-pole state is not finite");
  const auto [x, x_dot, theta, theta_dot] = s;
  const double force = action == 1 ? p.force : -p.force;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.half_length;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  StepResult r;
  r.state = {x + p.tau * x_dot, x_dot + p.tau * x_acc, theta + p.tau * theta_dot,
             theta_dot + p.tau * theta_acc};
  r.reward = 1.0;
  r.terminal = std::abs(r.state[0]) > p.x_threshold || std::abs(r.state[2]) > p.theta_threshold;
  return r;
}

class CartPole {
 public:
  static constexpr std::size_t kObservationSize = 4;
  static constexpr std::size_t kActionCount = 2;

  explicit CartPole(CartPoleParams params = {}) : params_(params) {}

  /// Initial state: every component uniform in [-0.05, 0.05].
  const CartPoleState& reset(SplitMix64& rng) {
    CartPoleState s;
    for (double& v : s) v = uniform_real(rng, -0.05, 0.05);
    return reset_to(s);
  }

  const CartPoleState& reset_to(const CartPoleState& s) {
    state_ = s;
    steps_ = 0;
    done_ = false;
    return state_;
  }

  StepResult step(std::size_t action) {
    if (done_) throw ContractError("cart-pole step after terminal state");
    StepResult r = cartpole_step(state_, action, params_);
    state_ = r.state;
    ++steps_;
    if (steps_ >= params_.max_steps) r.terminal = true;
    done_ = r.terminal;
    return r;
  }

  const CartPoleState& state() const { return state_; }
  std::size_t steps() const { return steps_; }
  bool done() const { return done_; }
  const CartPoleParams& params() const { return params_; }

 private:
  CartPoleParams params_;
  CartPoleState state_{};
  std::size_t steps_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Effective-dimension sphere

/// f(x) = |Q x[0:d_e]|^2 for a seeded d_e x d_e rotation Q. Coordinates
/// past d_e never influence the value.
class EffectiveSphere {
 public:
  EffectiveSphere(std::size_t dim, std::size_t effective_dim, std::uint64_t rotation_seed)
      : dim_(dim), effective_(effective_dim) {
    if (effective_dim < 1 || dim < effective_dim)
      throw ConfigError("effective sphere requires D >= d_e >= 1");
    const auto n = static_cast<Eigen::Index>(effective_dim);
    SplitMix64 rng(derive_seed(rotation_seed, "sphere/rotation"));
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) g(i, j) = standard_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    rotation_ = qr.householderQ();
    // Sign fix makes Q Haar-distributed and independent of QR conventions.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
      if (r(j, j) < 0) rotation_.col(j) *= -1.0;
  }

  std::size_t dim() const { return dim_; }
  std::size_t effective_dim() const { return effective_; }
  const Eigen::MatrixXd& rotation() const { return rotation_; }

  double operator()(std::span<const double> x) const {
    if (x.size() != dim_)
      throw InputError("sphere input has length " + std::to_string(x.size()) + ", expected " +
                       std::to_string(dim_));
    const Eigen::Map<const Eigen::VectorXd> head(x.data(), static_cast<Eigen::Index>(effective_));
    return (rotation_ * head).squaredNorm();
  }

 private:
  std::size_t dim_;
  std::size_t effective_;
  Eigen::MatrixXd rotation_;
};

inline double effective_sphere(std::span<const double> x, std::size_t effective_dim,
                               std::uint64_t rotation_seed) {
  return EffectiveSphere(x.size(), effective_dim, rotation_seed)(x);
}

// ---------------------------------------------------------------------------
// Evaluators

struct EpisodeBatch {
  double mean = 0.0;
  std::vector<double> returns;
  std::vector<std::uint64_t> lengths;
  std::uint64_t steps = 0;
};

/// A fitness backend. `rollout` must be safe to call concurrently.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
  /// Fitness to maximize. Deterministic given (x, rng state).
  virtual EpisodeBatch rollout(std::span<const double> x, std::size_t episodes,
                               SplitMix64& rng) const = 0;
};

/// Cart-pole driven by a greedy policy network.
class CartPoleEvaluator final : public Evaluator {
 public:
  explicit CartPoleEvaluator(NetworkSpec spec, CartPoleParams params = {})
      : spec_(std::make_shared<const NetworkSpec>(std::move(spec))), params_(params) {
    if (detail::shape_size(spec_->input_shape) != CartPole::kObservationSize ||
        spec_->action_count != CartPole::kActionCount)
      throw ConfigError("cart-pole needs a network with 4 inputs and 2 actions");
    dim_ = param_count(*spec_);
  }

  std::size_t dimension() const override { return dim_; }
  std::string name() const override { return "cartpole"; }
  const NetworkSpec& spec() const { return *spec_; }

  EpisodeBatch rollout(std::span<const double> x, std::size_t episodes,
                       SplitMix64& rng) const override {
    if (episodes == 0) throw ContractError("rollout needs at least one episode");
    const Policy policy(spec_, std::vector<double>(x.begin(), x.end()));
    EpisodeBatch out;
    for (std::size_t e = 0; e < episodes; ++e) {
      SplitMix64 episode_rng(rng());
      CartPole env(params_);
      auto obs = env.reset(episode_rng);
      double ret = 0.0;
      for (;;) {
        const StepResult r = env.step(policy.act(obs));
        ret += r.reward;
        obs = r.state;
        if (r.terminal) break;
      }
      out.returns.push_back(ret);
      out.lengths.push_back(env.steps());
      out.steps += env.steps();
    }
    out.mean = std::accumulate(out.returns.begin(), out.returns.end(), 0.0) /
               static_cast<double>(episodes);
    return out;
  }

 private:
  std::shared_ptr<const NetworkSpec> spec_;
  CartPoleParams params_;
  std::size_t dim_ = 0;
};

/// Negated effective sphere; one call costs one step whatever `episodes`.
class SphereEvaluator final : public Evaluator {
 public:
  SphereEvaluator(std::size_t dim, std::size_t effective_dim, std::uint64_t rotation_seed)
      : sphere_(dim, effective_dim, rotation_seed) {}

  std::size_t dimension() const override { return sphere_.dim(); }
  std::string name() const override { return "effective_sphere"; }
  const EffectiveSphere& sphere() const { return sphere_; }

  EpisodeBatch rollout(std::span<const double> x, std::size_t episodes,
                       SplitMix64&) const override {
    if (episodes == 0) throw ContractError("rollout needs at least one episode");
    const double v = -sphere_(x);
    return EpisodeBatch{v, std::vector<double>(episodes, v), {1}, 1};
  }

 private:
  EffectiveSphere sphere_;
};

/// Run `episodes` episodes and charge the steps to `budget`.
inline EpisodeBatch evaluate(std::span<const double> x, const Evaluator& evaluator,
                             std::size_t episodes, FitnessBudget& budget, SplitMix64& rng) {
  if (budget.exhausted())
    throw BudgetError("budget exhausted: " + std::to_string(budget.steps_used()) + " of " +
                      std::to_string(budget.max_steps()) + " steps used");
  EpisodeBatch r = evaluator.rollout(x, episodes, rng);
  budget.charge(r.steps);
  return r;
}

}  // namespace pesaerl
