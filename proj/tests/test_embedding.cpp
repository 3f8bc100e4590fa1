#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "pesaerl/embedding.hpp"

using namespace pesaerl;

namespace {

constexpr Bounds kWide{-1e9, 1e9};

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  SplitMix64 g(seed);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = standard_normal(g);
  return v;
}

}  // namespace

TEST(Embedding, DeterministicInSeed) {
  const auto a = RandomEmbedding::generate(5, 5, 123);
  const auto b = RandomEmbedding::generate(5, 5, 123);
  EXPECT_EQ(a.matrix(), b.matrix());
  EXPECT_NE(a.matrix(), RandomEmbedding::generate(5, 5, 124).matrix());
}

TEST(Embedding, RejectsDLargerThanD) {
  EXPECT_THROW(RandomEmbedding::generate(3, 5, 1), ContractError);
  EXPECT_THROW(RandomEmbedding::generate(3, 0, 1), ContractError);
}

TEST(Embedding, PseudoInverseAgainstLeastSquares) {
  const auto e = RandomEmbedding::generate(1000, 20, 77, kWide);
  const Eigen::MatrixXd a = e.matrix();
  // Independent route: Householder QR least squares of A Y = A.
  const Eigen::MatrixXd y_qr = a.colPivHouseholderQr().solve(a);
  const Eigen::MatrixXd y = e.encode_batch_unclipped(a);
  EXPECT_LT((y - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((y - y_qr).cwiseAbs().maxCoeff(), 1e-9);

  const Eigen::VectorXd x = random_vector(1000, 5);
  const Eigen::VectorXd ls = a.colPivHouseholderQr().solve(x);
  EXPECT_LT((e.encode_unclipped(x) - ls).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Embedding, HandWorkedThreeByTwo) {
  // A = [[1,0],[0,1],[1,1]]: A^T A = [[2,1],[1,2]]; x = (1,0,0) gives
  // A^T x = (1,0) and y = (2/3, -1/3).
  RandomEmbedding::RowMatrix a(3, 2);
  a << 1, 0, 0, 1, 1, 1;
  const auto e = RandomEmbedding::from_matrix(a, kWide);
  const Eigen::VectorXd y = e.encode(Eigen::Vector3d(1, 0, 0));
  EXPECT_NEAR(y(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(y(1), -1.0 / 3.0, 1e-15);
  // decode (2, -1) = (2, -1, 1)
  const Eigen::VectorXd x = e.decode(Eigen::Vector2d(2, -1));
  EXPECT_EQ(x, Eigen::Vector3d(2, -1, 1));
}

TEST(Embedding, ZeroMapsToZero) {
  const auto e = RandomEmbedding::generate(50, 5, 1);
  EXPECT_EQ(e.encode(Eigen::VectorXd::Zero(50)), Eigen::VectorXd::Zero(5));
  EXPECT_EQ(e.decode(Eigen::VectorXd::Zero(5)), Eigen::VectorXd::Zero(50));
}

TEST(Embedding, IdentityDoubleClips) {
  const auto e = RandomEmbedding::from_matrix(RandomEmbedding::RowMatrix::Identity(4, 4));
  const Eigen::Vector4d x(0.05, -0.3, 0.2, -0.01);
  EXPECT_EQ(e.encode(x), Eigen::Vector4d(0.05, -0.1, 0.1, -0.01));
}

TEST(Embedding, DecodeIsLinear) {
  const auto e = RandomEmbedding::generate(300, 12, 9);
  const Eigen::VectorXd y1 = random_vector(12, 1), y2 = random_vector(12, 2);
  EXPECT_LT((e.decode(y1 + y2) - e.decode(y1) - e.decode(y2)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Embedding, EncodeUnclippedIsLinear) {
  const auto e = RandomEmbedding::generate(300, 12, 9);
  const Eigen::VectorXd x = random_vector(300, 3);
  EXPECT_LT((e.encode_unclipped(2.5 * x) - 2.5 * e.encode_unclipped(x)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Embedding, ProjectionIsIdempotent) {
  const auto e = RandomEmbedding::generate(500, 10, 4);
  const Eigen::VectorXd x = random_vector(500, 8);
  const Eigen::VectorXd p = e.decode(e.encode_unclipped(x));
  const Eigen::VectorXd pp = e.decode(e.encode_unclipped(p));
  EXPECT_LT((pp - p).norm() / p.norm(), 1e-6);
}

TEST(Embedding, RoundTripOnColumnSpace) {
  const auto e = RandomEmbedding::generate(400, 8, 6);
  SplitMix64 g(1);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd y(8);
    for (auto& v : y) v = uniform_real(g, -0.1, 0.1);
    EXPECT_LT((e.encode(e.decode(y)) - y).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Embedding, OnDemandRowsMatchDenseBitForBit) {
  const auto dense = RandomEmbedding::generate(1500, 16, 31, {}, 100000);
  const auto lazy = RandomEmbedding::generate(1500, 16, 31, {}, 0);
  ASSERT_TRUE(dense.is_stored());
  ASSERT_FALSE(lazy.is_stored());
  EXPECT_EQ(dense.matrix(), lazy.matrix());
  EXPECT_EQ(dense.gram(), lazy.gram());
  Eigen::MatrixXd x(1500, 3);
  for (Eigen::Index c = 0; c < 3; ++c) x.col(c) = 0.05 * random_vector(1500, 40 + c);
  EXPECT_EQ(dense.encode_batch(x), lazy.encode_batch(x));
  const Eigen::VectorXd y = 0.1 * random_vector(16, 2);
  EXPECT_EQ(dense.decode(y), lazy.decode(y));
}

TEST(Embedding, RejectsBadInput) {
  const auto e = RandomEmbedding::generate(20, 4, 1);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(20);
  x(3) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(e.encode(x), InputError);
  EXPECT_THROW(e.encode(Eigen::VectorXd::Zero(19)), InputError);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  y(0) = std::nan("");
  EXPECT_THROW(e.decode(y), InputError);
}

TEST(Embedding, RankDeficientMatrixRejected) {
  RandomEmbedding::RowMatrix a(3, 2);
  a << 1, 2, 2, 4, 3, 6;
  EXPECT_THROW(RandomEmbedding::from_matrix(a), NumericError);
}

TEST(Embedding, GramConditionWithinThreshold) {
  const auto e = RandomEmbedding::generate(200, 100, 3);
  EXPECT_GE(e.condition_estimate(), 1.0);
  EXPECT_LE(e.condition_estimate(), RandomEmbedding::kMaxGramCondition);
  EXPECT_EQ(e.attempts(), 1);
  EXPECT_EQ(e.matrix_seed(), e.seed());
}
