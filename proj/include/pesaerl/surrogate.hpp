#pragma once

// Fuzzy classification pre-selection.
//
// Truly evaluated policies are kept in a bounded archive. At selection time
// the archive is split by fitness into "promising" (crisp membership 1) and
// "unpromising" (0) records, both the archive and the candidates are mapped
// into one embedded space, and each candidate is scored by its fuzzy k-NN
// membership in the promising class:
//
//   w_j = |y - y_j|^(-2 / (fuzzifier - 1)),   u(y) = sum u_j w_j / sum w_j
//
// over the k nearest labeled points. One candidate is then drawn among the
// best scored.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pesaerl/embedding.hpp"
#include "pesaerl/errors.hpp"
#include "pesaerl/random.hpp"

namespace pesaerl {

enum class SelectionRule { argmax, top_quantile };

struct FcpsConfig {
  std::size_t k = 3;
  double fuzzifier = 2.0;
  std::size_t min_archive = 6;
  double label_split = 0.5;
  std::size_t capacity = 200;
  SelectionRule rule = SelectionRule::argmax;
  double top_quantile = 0.5;  // only read by SelectionRule::top_quantile

  void validate() const {
    if (k < 1) throw ConfigError("surrogate.k must be >= 1");
    if (!(fuzzifier > 1.0)) throw ConfigError("surrogate.fuzzifier must be > 1");
    if (min_archive < std::max<std::size_t>(k, 2))
      throw ConfigError("surrogate.min_archive must be >= max(k, 2)");
    if (!(label_split > 0.0 && label_split < 1.0))
      throw ConfigError("surrogate.label_split must lie in (0, 1)");
    if (capacity < min_archive)
      throw ConfigError("surrogate.capacity must be >= surrogate.min_archive");
    if (!(top_quantile > 0.0 && top_quantile <= 1.0))
      throw ConfigError("surrogate.top_quantile must lie in (0, 1]");
  }
};

/// Metadata of one archived evaluation; the policy vector lives in the
/// archive's point matrix at the same slot.
struct EvaluationRecord {
  double fitness = 0.0;
  std::size_t generation = 0;
  std::size_t process_id = 0;
  std::uint64_t sequence = 0;  // global insertion counter
  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

/// Bounded FIFO of (policy, true fitness). Slots are reused ring-style, so
/// slot order is not insertion order once the archive has wrapped; use
/// `ordered_slots()` for oldest-first iteration.
class EvaluationArchive {
 public:
  EvaluationArchive(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {
    if (capacity == 0) throw ConfigError("archive capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::uint64_t next_sequence() const { return next_sequence_; }

  void append(const Eigen::VectorXd& x, double fitness, std::size_t generation,
              std::size_t process_id) {
    if (static_cast<std::size_t>(x.size()) != dim_)
      throw InputError("archive record has length " + std::to_string(x.size()) +
                       ", expected " + std::to_string(dim_));
    if (!std::isfinite(fitness)) throw InputError("archive record has non-finite fitness");
    EvaluationRecord rec{fitness, generation, process_id, next_sequence_++};
    std::size_t slot;
    if (records_.size() < capacity_) {
      slot = records_.size();
      if (static_cast<std::size_t>(points_.cols()) <= slot) {
        const auto grow = std::min(capacity_, std::max<std::size_t>(2 * slot, 8));
        points_.conservativeResize(static_cast<Eigen::Index>(dim_),
                                   static_cast<Eigen::Index>(grow));
      }
      records_.push_back(rec);
    } else {
      slot = head_;
      head_ = (head_ + 1) % capacity_;
      records_[slot] = rec;
    }
    points_.col(static_cast<Eigen::Index>(slot)) = x;
  }

  /// Records in slot order.
  std::span<const EvaluationRecord> records() const { return records_; }

  /// D x size() matrix of archived policies in slot order.
  auto points() const { return points_.leftCols(static_cast<Eigen::Index>(size())); }

  Eigen::VectorXd point(std::size_t slot) const {
    return points_.col(static_cast<Eigen::Index>(slot));
  }

  /// Slot indices from oldest to newest.
  std::vector<std::size_t> ordered_slots() const {
    std::vector<std::size_t> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = (head_ + i) % size();
    if (size() < capacity_) std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }

  /// Restore from a checkpoint; `slots` lists (record, point) oldest first.
  void restore(std::vector<std::pair<EvaluationRecord, Eigen::VectorXd>> oldest_first,
               std::uint64_t next_sequence) {
    records_.clear();
    head_ = 0;
    points_.resize(0, 0);
    next_sequence_ = 0;
    for (auto& [rec, x] : oldest_first) {
      next_sequence_ = rec.sequence;
      append(x, rec.fitness, rec.generation, rec.process_id);
    }
    next_sequence_ = next_sequence;
  }

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::vector<EvaluationRecord> records_;
  Eigen::MatrixXd points_;
  std::size_t head_ = 0;  // oldest slot once full
  std::uint64_t next_sequence_ = 0;
};

/// Number of promising records for N labeled points: ceil(split * N).
inline std::size_t promising_count(std::size_t n, double split) {
  // Guard against products such as 0.3 * 10 = 3.0000000000000004.
  const double raw = split * static_cast<double>(n);
  const double rounded = std::round(raw);
  const double c = std::abs(raw - rounded) < 1e-9 * std::max(1.0, raw) ? rounded : std::ceil(raw);
  return std::min(n, static_cast<std::size_t>(c));
}

/// Crisp promising-membership (1 or 0) per record, aligned with the input.
/// Records are ranked by fitness descending, ties by newer sequence first.
/// Returns nullopt when fewer than two records exist (surrogate inactive).
inline std::optional<std::vector<double>> label(std::span<const double> fitness,
                                                std::span<const std::uint64_t> sequence,
                                                double split) {
  const std::size_t n = fitness.size();
  if (sequence.size() != n) throw ContractError("label: fitness/sequence length mismatch");
  if (n < 2) return std::nullopt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (fitness[a] != fitness[b]) return fitness[a] > fitness[b];
    return sequence[a] > sequence[b];
  });
  std::vector<double> u(n, 0.0);
  const std::size_t top = promising_count(n, split);
  for (std::size_t i = 0; i < top; ++i) u[order[i]] = 1.0;
  return u;
}

inline std::optional<std::vector<double>> label(const EvaluationArchive& archive, double split) {
  std::vector<double> f;
  std::vector<std::uint64_t> seq;
  for (const auto& r : archive.records()) {
    f.push_back(r.fitness);
    seq.push_back(r.sequence);
  }
  return label(f, seq, split);
}

/// Fuzzy k-NN membership of `y` in the promising class. `points` is d x n,
/// `u` the crisp labels. Neighbors tied in distance are taken in column
/// order. If some of the k nearest points coincide with `y`, the result is
/// the mean label of those coincident points.
inline double membership(const Eigen::VectorXd& y, const Eigen::MatrixXd& points,
                         std::span<const double> u, const FcpsConfig& cfg) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (u.size() != n) throw ContractError("membership: label count mismatch");
  if (n < cfg.k)
    throw ContractError("membership: " + std::to_string(n) + " labeled points, k = " +
                        std::to_string(cfg.k));
  if (points.rows() != y.size()) throw InputError("membership: dimension mismatch");
  if (!y.allFinite() || !points.allFinite()) throw InputError("membership: non-finite input");

  std::vector<double> dist2(n);
  for (std::size_t j = 0; j < n; ++j)
    dist2[j] = (points.col(static_cast<Eigen::Index>(j)) - y).squaredNorm();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return dist2[a] != dist2[b] ? dist2[a] < dist2[b] : a < b;
                    });

  double zero_sum = 0.0;
  std::size_t zero_count = 0;
  for (std::size_t i = 0; i < cfg.k; ++i) {
    if (dist2[idx[i]] == 0.0) {
      zero_sum += u[idx[i]];
      ++zero_count;
    }
  }
  if (zero_count > 0) return zero_sum / static_cast<double>(zero_count);

  // Weights are formed relative to the nearest neighbor; the ratio is
  // unchanged and nothing overflows for tiny distances.
  const double exponent = -1.0 / (cfg.fuzzifier - 1.0);  // applied to squared distance
  const double nearest = dist2[idx[0]];
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < cfg.k; ++i) {
    const double w = std::pow(dist2[idx[i]] / nearest, exponent);
    num += u[idx[i]] * w;
    den += w;
  }
  return std::clamp(num / den, 0.0, 1.0);
}

struct Preselection {
  std::size_t index = 0;
  bool surrogate_active = false;
  std::vector<double> memberships;  // empty when inactive
};

/// Choose one index given per-candidate scores. Consumes exactly one draw.
inline std::size_t select_by_membership(std::span<const double> scores, const FcpsConfig& cfg,
                                        SplitMix64& rng) {
  const std::size_t m = scores.size();
  std::vector<std::size_t> pool;
  if (cfg.rule == SelectionRule::argmax) {
    const double best = *std::max_element(scores.begin(), scores.end());
    for (std::size_t i = 0; i < m; ++i)
      if (scores[i] == best) pool.push_back(i);
  } else {
    pool.resize(m);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::stable_sort(pool.begin(), pool.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    pool.resize(std::max<std::size_t>(1, promising_count(m, cfg.top_quantile)));
  }
  return pool[uniform_index(rng, pool.size())];
}

/// Pre-select one of the candidate columns (d x M, already embedded).
/// `encode_archive` maps the D x n archive points into the same space and is
/// only called once the archive holds at least `min_archive` records.
/// Exactly one draw is taken from `rng` on every call.
template <class Encoder>
  requires std::invocable<Encoder&, const EvaluationArchive&>
Preselection preselect(const Eigen::MatrixXd& candidates, const EvaluationArchive& archive,
                       Encoder&& encode_archive, const FcpsConfig& cfg, SplitMix64& rng) {
  const auto m = static_cast<std::size_t>(candidates.cols());
  if (m < 1) throw ContractError("preselect: need at least one candidate");
  Preselection out;
  if (archive.size() < cfg.min_archive) {
    out.index = uniform_index(rng, m);
    return out;
  }
  const auto labels = label(archive, cfg.label_split);
  const Eigen::MatrixXd encoded = encode_archive(archive);
  out.surrogate_active = true;
  out.memberships.resize(m);
  for (std::size_t j = 0; j < m; ++j)
    out.memberships[j] =
        membership(candidates.col(static_cast<Eigen::Index>(j)), encoded, *labels, cfg);
  out.index = select_by_membership(out.memberships, cfg, rng);
  return out;
}

/// Pre-selection through a random embedding: the archive is encoded with
/// the embedding that produced `candidates`.
inline Preselection preselect(const Eigen::MatrixXd& candidates, const EvaluationArchive& archive,
                              const RandomEmbedding& embedding, const FcpsConfig& cfg,
                              SplitMix64& rng) {
  return preselect(
      candidates, archive,
      [&](const EvaluationArchive& a) { return embedding.encode_batch(a.points()); }, cfg, rng);
}

}  // namespace pesaerl
