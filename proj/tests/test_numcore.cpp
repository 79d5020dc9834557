#include "mcdltv/adam.hpp"
#include "mcdltv/matrix.hpp"
#include "mcdltv/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace mcdltv;

namespace {

Matrix random_matrix(RngStream& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_EQ(matmul(Matrix::Identity(2, 2), a), a);
}

TEST(Matmul, RowTimesColumn) {
  Matrix a(1, 2), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  const Matrix c = matmul(a, b);
  ASSERT_EQ(c.rows(), 1);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_EQ(c(0, 0), 11.0);
}

TEST(Matmul, ZeroLeftOperand) {
  RngStream rng(1, "zero");
  const Matrix b = random_matrix(rng, 2, 5);
  EXPECT_TRUE(matmul(Matrix::Zero(2, 2), b).isZero(0.0));
}

TEST(Matmul, DimensionMismatchThrows) {
  EXPECT_THROW(matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(Matmul, MatchesEigenProduct) {
  RngStream rng(2, "eigen");
  const Matrix a = random_matrix(rng, 7, 5), b = random_matrix(rng, 5, 3);
  EXPECT_TRUE(matmul(a, b).isApprox(a * b, 1e-12));
}

TEST(Matmul, AssociativeOnRandomSmallMatrices) {
  RngStream rng(3, "assoc");
  for (int trial = 0; trial < 200; ++trial) {
    const auto dim = [&] { return static_cast<Eigen::Index>(1 + rng.below(6)); };
    const Eigen::Index n = dim(), k = dim(), l = dim(), m = dim();
    const Matrix a = random_matrix(rng, n, k), b = random_matrix(rng, k, l), c = random_matrix(rng, l, m);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    const double scale = std::max(1.0, left.cwiseAbs().maxCoeff());
    EXPECT_LT((left - right).cwiseAbs().maxCoeff() / scale, 1e-10);
  }
}

TEST(Matmul, RowResultIndependentOfBatch) {
  RngStream rng(4, "rows");
  const Matrix a = random_matrix(rng, 33, 17), b = random_matrix(rng, 17, 9);
  const Matrix full = matmul(a, b);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Matrix single = matmul(a.row(i), b);
    for (Eigen::Index j = 0; j < b.cols(); ++j) EXPECT_EQ(single(0, j), full(i, j));
  }
}

TEST(Philox, KnownAnswerVectors) {
  // Random123 reference vectors for philox4x32-10.
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, SameSeedAndLabelReplay) {
  RngStream a(42, "x"), b(42, "x");
  EXPECT_EQ(draw_uniform(a, 1000), draw_uniform(b, 1000));
}

TEST(RngStream, ZeroDrawsLeaveCounter) {
  RngStream s(42, "x");
  EXPECT_TRUE(draw_uniform(s, 0).empty());
  EXPECT_EQ(s.counter(), 0u);
  draw_uniform(s, 5);
  EXPECT_EQ(s.counter(), 5u);
}

TEST(RngStream, DifferentLabelsOrSeedsDiffer) {
  RngStream a(42, "x"), b(42, "y"), c(43, "x");
  const auto va = draw_uniform(a, 64), vb = draw_uniform(b, 64), vc = draw_uniform(c, 64);
  EXPECT_NE(va, vb);
  EXPECT_NE(va, vc);
}

TEST(RngStream, AdvancingOneStreamDoesNotAffectAnother) {
  RngStream a(9, "a"), b(9, "b"), b_ref(9, "b");
  draw_uniform(a, 100);
  EXPECT_EQ(draw_uniform(b, 10), draw_uniform(b_ref, 10));
}

TEST(RngStream, UniformMeanOverMillionDraws) {
  RngStream s(123, "lln");
  const auto v = draw_uniform(s, 1'000'000);
  for (double x : v) ASSERT_TRUE(x >= 0.0 && x < 1.0);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  EXPECT_NEAR(mean, 0.5, 0.01);
}

TEST(RngStream, IndependentLabelsUncorrelated) {
  RngStream a(5, "left"), b(5, "right");
  const int n = 200000;
  double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sab += x * y, sa += x, sb += y, saa += x * x, sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(corr), 0.01);
}

TEST(RngStream, NormalMoments) {
  RngStream s(6, "normal");
  const int n = 400000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(RngStream, BelowStaysInRange) {
  RngStream s(7, "below");
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) ++counts[s.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Matrix p(2, 2);
  p << 1, -2, 3.5, 0.25;
  const Matrix before = p;
  const Matrix g = Matrix::Zero(2, 2);
  AdamState adam;
  for (int i = 0; i < 5; ++i) adam.step({&p}, {&g});
  EXPECT_EQ(p, before);
  EXPECT_EQ(adam.steps(), 5);
}

TEST(Adam, FirstStepIsLearningRateOverOnePlusEpsilon) {
  Matrix p = Matrix::Constant(1, 1, 1.0);
  const Matrix g = Matrix::Constant(1, 1, 1.0);
  AdamState adam({.learning_rate = 0.1});
  adam.step({&p}, {&g});
  // m_hat = v_hat = 1, so the step is lr * 1 / (1 + eps).
  EXPECT_NEAR(p(0, 0), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.9, 1e-8);
}

TEST(Adam, ConvergesOnQuadratic) {
  Matrix w = Matrix::Zero(1, 1);
  AdamState adam({.learning_rate = 0.05});
  for (int i = 0; i < 2000; ++i) {
    const Matrix g = Matrix::Constant(1, 1, 2.0 * (w(0, 0) - 3.0));
    adam.step({&w}, {&g});
  }
  EXPECT_LT(std::abs(w(0, 0) - 3.0), 1e-2);
}

TEST(Adam, ConvergesOnRandomConvexQuadratics) {
  RngStream rng(8, "quad");
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix target = random_matrix(rng, 3, 2) * 3.0;
    Matrix w = Matrix::Zero(3, 2);
    AdamState adam({.learning_rate = 0.05});
    for (int i = 0; i < 3000; ++i) {
      const Matrix g = 2.0 * (w - target);
      adam.step({&w}, {&g});
    }
    EXPECT_LT((w - target).cwiseAbs().maxCoeff(), 1e-2);
  }
}

TEST(Adam, ShapeMismatchAndNonFiniteThrow) {
  Matrix p = Matrix::Zero(2, 2);
  const Matrix wrong = Matrix::Zero(1, 2);
  AdamState adam;
  EXPECT_THROW(adam.step({&p}, {&wrong}), std::invalid_argument);
  Matrix q = Matrix::Zero(1, 1);
  const Matrix nan = Matrix::Constant(1, 1, std::nan(""));
  AdamState adam2;
  EXPECT_THROW(adam2.step({&q}, {&nan}), NonFiniteError);
}
