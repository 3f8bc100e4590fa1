#pragma once

// Random Gaussian embedding between an ambient space R^D and an embedded
// space R^d (d <= D).
//
//   decode(y) = A y
//   encode(x) = clip(A+ x, [low, high]),   A+ = (A^T A)^{-1} A^T
//
// Entry (r, c) of A is the c-th standard normal drawn from a stream keyed by
// (matrix seed, r). Small matrices are stored densely; above `dense_limit`
// ambient rows, rows are regenerated on demand. Both storage modes walk A in
// the same fixed row blocks, so they produce bit-identical results.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pesaerl/errors.hpp"
#include "pesaerl/random.hpp"

namespace pesaerl {

/// Box constraint applied to embedded coordinates.
struct Bounds {
  double low = -0.1;
  double high = 0.1;
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

class RandomEmbedding {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  static constexpr std::size_t kRowBlock = 256;
  static constexpr std::size_t kDefaultDenseLimit = 250'000;
  static constexpr double kMaxGramCondition = 1e12;
  static constexpr int kMaxRegenerations = 3;

  /// Draw A with i.i.d. N(0,1) entries from `seed`. If the Gram matrix is
  /// numerically singular the matrix is redrawn from a derived seed, at most
  /// kMaxRegenerations times.
  static RandomEmbedding generate(std::size_t ambient, std::size_t embedded, std::uint64_t seed,
                                  Bounds bounds = {},
                                  std::size_t dense_limit = kDefaultDenseLimit) {
    if (embedded < 1 || ambient < embedded)
      throw ContractError("embedding requires D >= d >= 1, got D=" + std::to_string(ambient) +
                          ", d=" + std::to_string(embedded));
    if (!(bounds.low <= bounds.high)) throw ContractError("embedding bounds require low <= high");
    for (int attempt = 0; attempt <= kMaxRegenerations; ++attempt) {
      RandomEmbedding e;
      e.ambient_ = ambient;
      e.embedded_ = embedded;
      e.bounds_ = bounds;
      e.seed_ = seed;
      e.matrix_seed_ = attempt == 0 ? seed : derive_seed(seed, "embedding/regenerate", attempt);
      e.attempts_ = attempt + 1;
      if (ambient <= dense_limit) {
        e.dense_.resize(static_cast<Eigen::Index>(ambient), static_cast<Eigen::Index>(embedded));
        for (std::size_t r = 0; r < ambient; ++r) e.fill_row(r, e.dense_.row(r).data());
        e.stored_ = true;
      }
      if (e.factorize()) return e;
    }
    throw NumericError("random embedding Gram matrix singular after " +
                       std::to_string(kMaxRegenerations) + " regenerations");
  }

  /// Wrap an explicit matrix (test doubles, identity embeddings).
  static RandomEmbedding from_matrix(RowMatrix a, Bounds bounds = {}) {
    if (a.cols() < 1 || a.rows() < a.cols())
      throw ContractError("embedding matrix must be D x d with D >= d >= 1");
    RandomEmbedding e;
    e.ambient_ = static_cast<std::size_t>(a.rows());
    e.embedded_ = static_cast<std::size_t>(a.cols());
    e.bounds_ = bounds;
    e.dense_ = std::move(a);
    e.stored_ = true;
    if (!e.factorize()) throw NumericError("embedding matrix is not of full column rank");
    return e;
  }

  std::size_t ambient_dim() const { return ambient_; }
  std::size_t embedded_dim() const { return embedded_; }
  std::uint64_t seed() const { return seed_; }
  /// Seed the stored matrix was actually drawn from (differs from seed()
  /// only after a regeneration).
  std::uint64_t matrix_seed() const { return matrix_seed_; }
  int attempts() const { return attempts_; }
  bool is_stored() const { return stored_; }
  const Bounds& bounds() const { return bounds_; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// Squared ratio of the extreme Cholesky pivots; a lower bound on cond(A^T A).
  double condition_estimate() const { return condition_; }

  RowMatrix matrix() const {
    if (stored_) return dense_;
    RowMatrix a(static_cast<Eigen::Index>(ambient_), static_cast<Eigen::Index>(embedded_));
    for (std::size_t r = 0; r < ambient_; ++r) fill_row(r, a.row(r).data());
    return a;
  }

  Eigen::VectorXd encode_unclipped(const Eigen::VectorXd& x) const {
    return encode_batch_unclipped(x);
  }

  Eigen::VectorXd encode(const Eigen::VectorXd& x) const { return clip(encode_unclipped(x)); }

  /// Encode every column of `x` (D x n) into a d x n matrix.
  template <class Derived>
  Eigen::MatrixXd encode_batch_unclipped(const Eigen::MatrixBase<Derived>& x) const {
    check_input(x, ambient_, "encode");
    Eigen::MatrixXd at_x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(embedded_), x.cols());
    for_each_block([&](std::size_t r0, const auto& block) {
      at_x.noalias() += block.transpose() * x.middleRows(static_cast<Eigen::Index>(r0),
                                                          block.rows());
    });
    return llt_.solve(at_x);
  }

  template <class Derived>
  Eigen::MatrixXd encode_batch(const Eigen::MatrixBase<Derived>& x) const {
    return clip(encode_batch_unclipped(x));
  }

  Eigen::VectorXd decode(const Eigen::VectorXd& y) const { return decode_batch(y); }

  /// Decode every column of `y` (d x n) into a D x n matrix.
  template <class Derived>
  Eigen::MatrixXd decode_batch(const Eigen::MatrixBase<Derived>& y) const {
    check_input(y, embedded_, "decode");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ambient_), y.cols());
    for_each_block([&](std::size_t r0, const auto& block) {
      out.middleRows(static_cast<Eigen::Index>(r0), block.rows()).noalias() = block * y;
    });
    return out;
  }

  Eigen::MatrixXd clip(Eigen::MatrixXd y) const {
    y = y.cwiseMax(bounds_.low).cwiseMin(bounds_.high);
    return y;
  }

 private:
  RandomEmbedding() = default;

  void fill_row(std::size_t r, double* out) const {
    SplitMix64 rng(derive_seed(matrix_seed_, "embedding/row", r));
    for (std::size_t c = 0; c < embedded_; ++c) out[c] = standard_normal(rng);
  }

  template <class F>
  void for_each_block(F&& f) const {
    RowMatrix scratch;
    for (std::size_t r0 = 0; r0 < ambient_; r0 += kRowBlock) {
      const std::size_t rows = std::min(kRowBlock, ambient_ - r0);
      if (stored_) {
        f(r0, dense_.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(rows)));
      } else {
        scratch.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(embedded_));
        for (std::size_t i = 0; i < rows; ++i) fill_row(r0 + i, scratch.row(i).data());
        f(r0, scratch.topRows(static_cast<Eigen::Index>(rows)));
      }
    }
  }

  bool factorize() {
    const auto d = static_cast<Eigen::Index>(embedded_);
    Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(d, d);
    for_each_block([&](std::size_t, const auto& block) {
      lower.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    });
    gram_ = lower.selfadjointView<Eigen::Lower>();
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success) return false;
    const Eigen::VectorXd diag = llt_.matrixLLT().diagonal();
    const double lo = diag.minCoeff(), hi = diag.maxCoeff();
    if (!(lo > 0.0) || !std::isfinite(hi)) return false;
    condition_ = (hi / lo) * (hi / lo);
    return condition_ <= kMaxGramCondition;
  }

  template <class Derived>
  static void check_input(const Eigen::MatrixBase<Derived>& m, std::size_t rows, const char* op) {
    if (static_cast<std::size_t>(m.rows()) != rows)
      throw InputError(std::string(op) + ": expected length " + std::to_string(rows) +
                       ", got " + std::to_string(m.rows()));
    if (!m.allFinite()) throw InputError(std::string(op) + ": non-finite input");
  }

  std::size_t ambient_ = 0;
  std::size_t embedded_ = 0;
  Bounds bounds_{};
  std::uint64_t seed_ = 0;
  std::uint64_t matrix_seed_ = 0;
  int attempts_ = 1;
  bool stored_ = false;
  RowMatrix dense_;
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double condition_ = 1.0;
};

}  // namespace pesaerl
