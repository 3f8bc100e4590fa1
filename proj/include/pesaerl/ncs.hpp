#pragma once

// Negatively correlated search with embedded fuzzy pre-selection.
//
// lambda search processes each keep a parent x_i and an isotropic Gaussian
// N(x_i, sigma_i^2 I). Per generation every process samples M offspring,
// maps them through the random embedding, lets the surrogate pick one,
// decodes and truly evaluates it, and keeps it when
//
//   f(x') + phi * d(p') > f(x) + phi * d(p)
//
// where d(.) is the smallest Bhattacharyya distance to the other processes'
// distributions. sigma follows the 1/5 success rule every `epoch` iterations.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "pesaerl/embedding.hpp"
#include "pesaerl/environments.hpp"
#include "pesaerl/errors.hpp"
#include "pesaerl/random.hpp"
#include "pesaerl/surrogate.hpp"

namespace pesaerl {

struct NcsConfig {
  std::size_t lambda = 6;
  std::size_t epoch = 5;
  double r = 1.2;
  double phi = 1.0;
  std::size_t candidates = 3;  // M
  double sigma0 = 0.02;
  bool normalize_fd = false;

  void validate() const {
    if (lambda < 1) throw ConfigError("ncs.lambda must be >= 1");
    if (epoch < 1) throw ConfigError("ncs.epoch must be >= 1");
    if (!(r > 1.0) || !std::isfinite(r)) throw ConfigError("ncs.r must be > 1");
    if (!(phi >= 0.0) || !std::isfinite(phi)) throw ConfigError("ncs.phi must be >= 0");
    if (candidates < 1) throw ConfigError("ncs.m must be >= 1");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw ConfigError("ncs.sigma0 must be > 0");
  }
};

enum class EmbeddingMode { per_iteration, fixed };

/// Everything the engine needs besides the fitness backend.
struct SearchConfig {
  NcsConfig ncs;
  FcpsConfig fcps;
  bool surrogate = true;
  bool bypass_embedding = false;  // identity in place of the random embedding
  EmbeddingMode embedding_mode = EmbeddingMode::per_iteration;
  bool sample_in_subspace = false;
  std::size_t embedded_dim = 100;
  std::size_t dense_limit = RandomEmbedding::kDefaultDenseLimit;
  Bounds bounds{};
  std::size_t train_episodes = 1;
  std::size_t workers = 1;
  std::uint64_t seed = 0;

  void validate(std::size_t ambient_dim) const {
    ncs.validate();
    fcps.validate();
    if (!(bounds.low < bounds.high)) throw ConfigError("bounds.low must be < bounds.high");
    if (train_episodes < 1) throw ConfigError("env.train_episodes must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!bypass_embedding && (embedded_dim < 1 || embedded_dim > ambient_dim))
      throw ConfigError("embedding.d must lie in [1, D] (D = " + std::to_string(ambient_dim) +
                        ")");
  }
};

/// Independent random streams owned by one search process.
struct ProcessStreams {
  SplitMix64 sample;
  SplitMix64 embedding;
  SplitMix64 select;
  SplitMix64 episodes;
  friend bool operator==(const ProcessStreams&, const ProcessStreams&) = default;

  static ProcessStreams derive(std::uint64_t master, std::size_t id) {
    return {make_stream(master, "process/sample", id), make_stream(master, "process/embedding", id),
            make_stream(master, "process/select", id), make_stream(master, "process/episodes", id)};
  }
};

struct SearchProcess {
  std::size_t id = 0;
  Eigen::VectorXd x;  // current parent
  double sigma = 0.0;
  double fitness = 0.0;  // last true evaluation of x
  std::size_t success_count = 0;
  std::size_t iter_in_epoch = 0;
  ProcessStreams rng;
};

// ---------------------------------------------------------------------------
// Primitives

/// Bhattacharyya distance between N(mu1, s1^2 I) and N(mu2, s2^2 I).
template <class A, class B>
double bhattacharyya(const Eigen::MatrixBase<A>& mu1, double s1, const Eigen::MatrixBase<B>& mu2,
                     double s2) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw ContractError("bhattacharyya: sigma must be positive");
  if (mu1.size() != mu2.size()) throw ContractError("bhattacharyya: dimension mismatch");
  double dist2 = 0.0;
  for (Eigen::Index k = 0; k < mu1.size(); ++k) {
    const double diff = mu1(k) - mu2(k);
    dist2 += diff * diff;
  }
  const double var_sum = s1 * s1 + s2 * s2;
  const double n = static_cast<double>(mu1.size());
  return dist2 / (4.0 * var_sum) + 0.5 * n * std::log(var_sum / (2.0 * s1 * s2));
}

/// Search distribution of one process, as seen by the others.
struct Distribution {
  Eigen::VectorXd mean;
  double sigma = 0.0;
};

/// Smallest distance from process i's distribution (or the probe in its
/// place) to every other process. Zero when there is no other process.
inline double diversity(std::size_t i, std::span<const Distribution> all,
                        const Distribution* probe = nullptr) {
  if (all.size() <= 1) return 0.0;
  const Distribution& self = probe ? *probe : all[i];
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < all.size(); ++j) {
    if (j == i) continue;
    best = std::min(best, bhattacharyya(self.mean, self.sigma, all[j].mean, all[j].sigma));
  }
  return best;
}

inline bool accept(double f_new, double d_new, double f_old, double d_old, double phi) {
  return f_new + phi * d_new > f_old + phi * d_old;
}

/// Scale-free variant: each pair is divided by the sum of its magnitudes
/// before combining.
inline bool accept_normalized(double f_new, double d_new, double f_old, double d_old, double phi) {
  auto share = [](double a, double b) {
    const double s = std::abs(a) + std::abs(b);
    return s > 0.0 ? std::pair{a / s, b / s} : std::pair{0.0, 0.0};
  };
  const auto [fn, fo] = share(f_new, f_old);
  const auto [dn, d_o] = share(d_new, d_old);
  return fn + phi * dn > fo + phi * d_o;
}

/// M columns drawn from N(x, sigma^2 I); exactly M * D normal variates from
/// the process's sampling stream, candidate-major.
inline Eigen::MatrixXd sample_candidates(SearchProcess& p, std::size_t m) {
  if (m < 1) throw ContractError("sample_candidates: M must be >= 1");
  const auto dim = p.x.size();
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index k = 0; k < dim; ++k)
      out(k, j) = p.x(k) + p.sigma * standard_normal(p.rng.sample);
  return out;
}

/// 1/5 success rule, applied at epoch boundaries.
inline double adapt_sigma(SearchProcess& p, const NcsConfig& cfg) {
  ++p.iter_in_epoch;
  if (p.iter_in_epoch >= cfg.epoch) {
    // success rate compared with 1/5 in integers: s / epoch vs 1 / 5
    const std::size_t lhs = 5 * p.success_count;
    if (lhs > cfg.epoch) {
      p.sigma *= cfg.r;
    } else if (lhs < cfg.epoch) {
      p.sigma /= cfg.r;
    }
    p.success_count = 0;
    p.iter_in_epoch = 0;
  }
  return p.sigma;
}

/// Initial parents uniform in [low, high]^D, drawn process by process from
/// the "init" stream. No evaluation.
inline std::vector<SearchProcess> make_processes(const NcsConfig& cfg, std::size_t dim,
                                                 const Bounds& bounds, std::uint64_t master) {
  SplitMix64 init = make_stream(master, "init");
  std::vector<SearchProcess> out(cfg.lambda);
  for (std::size_t i = 0; i < cfg.lambda; ++i) {
    auto& p = out[i];
    p.id = i;
    p.x.resize(static_cast<Eigen::Index>(dim));
    for (auto& v : p.x) v = uniform_real(init, bounds.low, bounds.high);
    p.sigma = cfg.sigma0;
    p.rng = ProcessStreams::derive(master, i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine

struct ProcessReport {
  std::size_t process_id = 0;
  bool surrogate_active = false;
  std::vector<double> memberships;
  std::size_t chosen = 0;
  double fitness = 0.0;  // true fitness of the offspring
  bool accepted = false;
  double sigma = 0.0;  // after adaptation
  double diversity_old = 0.0;
  double diversity_new = 0.0;
  std::uint64_t steps = 0;       // consumed by this evaluation
  std::uint64_t steps_used = 0;  // cumulative, in process order
  std::uint64_t embedding_seed = 0;
};

struct GenerationReport {
  std::size_t generation = 0;  // 0 = initialization
  std::vector<ProcessReport> processes;
};

struct BestPolicy {
  Eigen::VectorXd x;
  double fitness = -std::numeric_limits<double>::infinity();
  std::size_t generation = 0;
  std::size_t process_id = 0;
  std::uint64_t evaluation = 0;  // 1-based index of the evaluation that found it
};

/// Complete mutable engine state; what a checkpoint stores.
struct EngineState {
  std::size_t generation = 0;
  std::vector<SearchProcess> processes;
  BestPolicy best;
  std::uint64_t steps_used = 0;
  std::uint64_t evaluations = 0;
  // Fixed embedding only: archived policies in the embedded space, by
  // record sequence number.
  std::vector<std::pair<std::uint64_t, Eigen::VectorXd>> embedded_archive;
};

class PolicySearch {
 public:
  PolicySearch(SearchConfig cfg, const Evaluator& evaluator, FitnessBudget& budget)
      : cfg_(std::move(cfg)),
        evaluator_(evaluator),
        budget_(budget),
        dim_(evaluator.dimension()),
        archive_(cfg_.fcps.capacity, dim_) {
    cfg_.validate(dim_);
    if (!cfg_.bypass_embedding && cfg_.embedding_mode == EmbeddingMode::fixed)
      fixed_ = RandomEmbedding::generate(dim_, cfg_.embedded_dim,
                                         derive_seed(cfg_.seed, "embedding/fixed"), cfg_.bounds,
                                         cfg_.dense_limit);
  }

  const SearchConfig& config() const { return cfg_; }
  std::size_t dimension() const { return dim_; }
  std::size_t generation() const { return generation_; }
  std::span<const SearchProcess> processes() const { return processes_; }
  const EvaluationArchive& archive() const { return archive_; }
  const BestPolicy& best() const { return best_; }
  bool initialized() const { return !processes_.empty(); }
  const std::optional<RandomEmbedding>& fixed_embedding() const { return fixed_; }

  /// Draw and evaluate the initial parents (lambda true evaluations).
  GenerationReport initialize() {
    if (initialized()) throw ContractError("search already initialized");
    processes_ = make_processes(cfg_.ncs, dim_, cfg_.bounds, cfg_.seed);
    GenerationReport rep;
    rep.generation = 0;
    for (auto& p : processes_) {
      const EpisodeBatch r = evaluate(std::span<const double>(p.x.data(), dim_), evaluator_,
                                      cfg_.train_episodes, budget_, p.rng.episodes);
      p.fitness = r.mean;
      ProcessReport pr;
      pr.process_id = p.id;
      pr.fitness = r.mean;
      pr.accepted = true;
      pr.sigma = p.sigma;
      pr.steps = r.steps;
      pr.steps_used = budget_.steps_used();
      rep.processes.push_back(pr);
      commit(p.x, r.mean, 0, p.id);
    }
    steps_at_generation_start_ = budget_.steps_used();
    return rep;
  }

  /// One generation: every process produces exactly one true evaluation.
  /// Returns nullopt (and does nothing) once the budget is exhausted.
  std::optional<GenerationReport> step() {
    if (!initialized()) throw ContractError("step before initialize");
    if (budget_.exhausted()) return std::nullopt;
    ++generation_;

    std::vector<Distribution> snapshot;
    snapshot.reserve(processes_.size());
    for (const auto& p : processes_) snapshot.push_back({p.x, p.sigma});
    if (fixed_) refresh_fixed_cache();

    std::vector<Outcome> outcomes(processes_.size());
    if (fixed_) {
      propose_fixed(outcomes);
    } else {
      run_bodies([&](std::size_t i) { outcomes[i] = propose(processes_[i]); });
    }
    run_bodies([&](std::size_t i) { finish(processes_[i], outcomes[i], snapshot); });

    // Barrier: appends and bookkeeping in process order.
    GenerationReport rep;
    rep.generation = generation_;
    std::uint64_t steps = steps_at_generation_start_;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      auto& o = outcomes[i];
      steps += o.report.steps;
      o.report.steps_used = steps;
      // encode(A y) is y itself: no need to push the offspring back through A+.
      if (fixed_) encoded_cache_.emplace(archive_.next_sequence(), std::move(o.embedded));
      commit(o.offspring, o.report.fitness, generation_, i);
      rep.processes.push_back(std::move(o.report));
    }
    steps_at_generation_start_ = steps;
    return rep;
  }

  EngineState state() const {
    EngineState s{generation_, processes_, best_, budget_.steps_used(), budget_.evaluations(), {}};
    s.embedded_archive.assign(encoded_cache_.begin(), encoded_cache_.end());
    std::sort(s.embedded_archive.begin(), s.embedded_archive.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return s;
  }

  /// Resume from a checkpointed state and archive.
  void restore(EngineState s, EvaluationArchive archive) {
    generation_ = s.generation;
    processes_ = std::move(s.processes);
    best_ = std::move(s.best);
    budget_.restore(s.steps_used, s.evaluations);
    steps_at_generation_start_ = s.steps_used;
    evaluation_index_ = s.evaluations;
    archive_ = std::move(archive);
    encoded_cache_.clear();
    for (auto& [seq, y] : s.embedded_archive) encoded_cache_.emplace(seq, std::move(y));
  }

 private:
  struct Outcome {
    ProcessReport report;
    Eigen::VectorXd offspring;
    Eigen::VectorXd embedded;  // fixed embedding only: the chosen y
  };

  template <class F>
  void run_bodies(F&& f) {
    const std::size_t n = processes_.size();
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    const std::size_t workers = std::min(cfg_.workers, n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i; (i = next.fetch_add(1)) < n;) guarded(i);
        });
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  /// Sample, embed and pre-select one offspring (per-iteration or bypassed
  /// embedding).
  Outcome propose(SearchProcess& p) const {
    const std::size_t m = cfg_.ncs.candidates;
    Outcome out;
    ProcessReport& rep = out.report;
    rep.process_id = p.id;

    std::optional<RandomEmbedding> emb;
    if (!cfg_.bypass_embedding) {
      emb = RandomEmbedding::generate(dim_, cfg_.embedded_dim, p.rng.embedding(), cfg_.bounds,
                                      cfg_.dense_limit);
      rep.embedding_seed = emb->matrix_seed();
    }

    Eigen::MatrixXd ambient, embedded;
    if (emb && cfg_.sample_in_subspace) {
      embedded = sample_embedded(p, emb->encode(p.x), m, *emb);
    } else {
      ambient = sample_candidates(p, m);
      if (emb) embedded = emb->encode_batch(ambient);
    }
    const Eigen::MatrixXd& space = emb ? embedded : ambient;

    if (cfg_.surrogate) {
      Preselection sel =
          emb ? preselect(space, archive_, *emb, cfg_.fcps, p.rng.select)
              : preselect(space, archive_, [](const EvaluationArchive& a) {
                  return Eigen::MatrixXd(a.points());
                }, cfg_.fcps, p.rng.select);
      record_selection(rep, std::move(sel));
    } else {
      rep.chosen = uniform_index(p.rng.select, m);
    }

    const auto col = static_cast<Eigen::Index>(rep.chosen);
    out.offspring = emb ? emb->decode(embedded.col(col)) : Eigen::VectorXd(ambient.col(col));
    return out;
  }

  /// Fixed embedding: the whole generation is encoded and decoded in one
  /// pass over A each. Every process still draws from its own streams.
  void propose_fixed(std::vector<Outcome>& out) {
    const RandomEmbedding& emb = *fixed_;
    const std::size_t m = cfg_.ncs.candidates;
    const std::size_t n = processes_.size();
    const auto d = static_cast<Eigen::Index>(cfg_.embedded_dim);
    const auto mi = static_cast<Eigen::Index>(m);

    Eigen::MatrixXd embedded;
    if (cfg_.sample_in_subspace) {
      Eigen::MatrixXd parents(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) parents.col(static_cast<Eigen::Index>(i)) = processes_[i].x;
      const Eigen::MatrixXd centers = emb.encode_batch(parents);
      embedded.resize(d, static_cast<Eigen::Index>(n) * mi);
      for (std::size_t i = 0; i < n; ++i)
        embedded.middleCols(static_cast<Eigen::Index>(i) * mi, mi) =
            sample_embedded(processes_[i],
                            centers.col(static_cast<Eigen::Index>(i)), m, emb);
    } else {
      Eigen::MatrixXd ambient(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(n) * mi);
      for (std::size_t i = 0; i < n; ++i)
        ambient.middleCols(static_cast<Eigen::Index>(i) * mi, mi) =
            sample_candidates(processes_[i], m);
      embedded = emb.encode_batch(ambient);
    }

    const bool scored = cfg_.surrogate && archive_.size() >= cfg_.fcps.min_archive;
    const Eigen::MatrixXd archive_encoded = scored ? cached_encoding(archive_) : Eigen::MatrixXd();
    const auto encoder = [&](const EvaluationArchive&) { return archive_encoded; };

    Eigen::MatrixXd chosen(d, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      SearchProcess& p = processes_[i];
      ProcessReport& rep = out[i].report;
      rep.process_id = p.id;
      rep.embedding_seed = emb.matrix_seed();
      const Eigen::MatrixXd cands = embedded.middleCols(static_cast<Eigen::Index>(i) * mi, mi);
      if (cfg_.surrogate) {
        record_selection(rep, preselect(cands, archive_, encoder, cfg_.fcps, p.rng.select));
      } else {
        rep.chosen = uniform_index(p.rng.select, m);
      }
      chosen.col(static_cast<Eigen::Index>(i)) = cands.col(static_cast<Eigen::Index>(rep.chosen));
    }
    const Eigen::MatrixXd decoded = emb.decode_batch(chosen);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].offspring = decoded.col(static_cast<Eigen::Index>(i));
      out[i].embedded = chosen.col(static_cast<Eigen::Index>(i));
    }
  }

  /// Candidates drawn in the embedded box around an encoded parent.
  static Eigen::MatrixXd sample_embedded(SearchProcess& p, const Eigen::VectorXd& center,
                                         std::size_t m, const RandomEmbedding& emb) {
    Eigen::MatrixXd out(center.size(), static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index k = 0; k < center.size(); ++k)
        out(k, j) = center(k) + p.sigma * standard_normal(p.rng.sample);
    return emb.clip(std::move(out));
  }

  static void record_selection(ProcessReport& rep, Preselection sel) {
    rep.chosen = sel.index;
    rep.surrogate_active = sel.surrogate_active;
    rep.memberships = std::move(sel.memberships);
  }

  /// True evaluation of the proposed offspring, then acceptance and
  /// step-size adaptation.
  void finish(SearchProcess& p, Outcome& out, std::span<const Distribution> snapshot) const {
    ProcessReport& rep = out.report;
    const EpisodeBatch r = evaluator_.rollout(
        std::span<const double>(out.offspring.data(), dim_), cfg_.train_episodes, p.rng.episodes);
    budget_.charge(r.steps);
    rep.fitness = r.mean;
    rep.steps = r.steps;

    const Distribution probe{out.offspring, p.sigma};
    rep.diversity_old = diversity(p.id, snapshot);
    rep.diversity_new = diversity(p.id, snapshot, &probe);
    rep.accepted = cfg_.ncs.normalize_fd
                       ? accept_normalized(rep.fitness, rep.diversity_new, p.fitness,
                                           rep.diversity_old, cfg_.ncs.phi)
                       : accept(rep.fitness, rep.diversity_new, p.fitness, rep.diversity_old,
                                cfg_.ncs.phi);
    if (rep.accepted) {
      p.x = out.offspring;
      p.fitness = rep.fitness;
      ++p.success_count;
    }
    rep.sigma = adapt_sigma(p, cfg_.ncs);
  }

  void commit(const Eigen::VectorXd& x, double fitness, std::size_t generation,
              std::size_t process_id) {
    archive_.append(x, fitness, generation, process_id);
    ++evaluation_index_;
    if (fitness > best_.fitness) {
      best_.x = x;
      best_.fitness = fitness;
      best_.generation = generation;
      best_.process_id = process_id;
      best_.evaluation = evaluation_index_;
    }
  }

  // Encodings under the fixed embedding, keyed by record sequence number.
  void refresh_fixed_cache() {
    std::unordered_map<std::uint64_t, Eigen::VectorXd> next;
    std::vector<std::size_t> missing;
    const auto recs = archive_.records();
    for (std::size_t s = 0; s < recs.size(); ++s) {
      auto it = encoded_cache_.find(recs[s].sequence);
      if (it != encoded_cache_.end()) {
        next.emplace(recs[s].sequence, std::move(it->second));
      } else {
        missing.push_back(s);
      }
    }
    if (!missing.empty()) {
      Eigen::MatrixXd pts(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(missing.size()));
      for (std::size_t j = 0; j < missing.size(); ++j)
        pts.col(static_cast<Eigen::Index>(j)) = archive_.points().col(static_cast<Eigen::Index>(missing[j]));
      const Eigen::MatrixXd enc = fixed_->encode_batch(pts);
      for (std::size_t j = 0; j < missing.size(); ++j)
        next.emplace(recs[missing[j]].sequence, enc.col(static_cast<Eigen::Index>(j)));
    }
    encoded_cache_ = std::move(next);
  }

  Eigen::MatrixXd cached_encoding(const EvaluationArchive& a) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(cfg_.embedded_dim),
                        static_cast<Eigen::Index>(a.size()));
    const auto recs = a.records();
    for (std::size_t s = 0; s < recs.size(); ++s)
      out.col(static_cast<Eigen::Index>(s)) = encoded_cache_.at(recs[s].sequence);
    return out;
  }

  SearchConfig cfg_;
  const Evaluator& evaluator_;
  FitnessBudget& budget_;
  std::size_t dim_;
  EvaluationArchive archive_;
  std::optional<RandomEmbedding> fixed_;
  std::unordered_map<std::uint64_t, Eigen::VectorXd> encoded_cache_;
  std::vector<SearchProcess> processes_;
  BestPolicy best_;
  std::size_t generation_ = 0;
  std::uint64_t steps_at_generation_start_ = 0;
  std::uint64_t evaluation_index_ = 0;
};

}  // namespace pesaerl
