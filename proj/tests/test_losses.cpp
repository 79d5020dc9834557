#include "mcdltv/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace mcdltv;

namespace {

double inverse_softplus(double s) { return std::log(std::expm1(s)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

Matrix ziln_row(double p, double mu, double sigma) {
  Matrix m(1, 3);
  m << logit(p), mu, inverse_softplus(sigma);
  return m;
}

template <class F>
Matrix numeric_grad(Matrix out, F f, double h = 1e-6) {
  Matrix g(out.rows(), out.cols());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double saved = out.data()[k];
    out.data()[k] = saved + h;
    const double up = f(out);
    out.data()[k] = saved - h;
    const double down = f(out);
    out.data()[k] = saved;
    g.data()[k] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_rel_error(const Matrix& a, const Matrix& n) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = n.data()[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-5}));
  }
  return worst;
}

}  // namespace

TEST(LogMse, ZeroAtExactLogTarget) {
  const std::vector<double> y{0.0, 1.0, 10.0, 1234.5};
  Matrix out(4, 1);
  for (int i = 0; i < 4; ++i) out(i, 0) = std::log1p(y[i]);
  const LossValue v = log_mse(out, y);
  EXPECT_EQ(v.loss, 0.0);
  EXPECT_TRUE(v.grad.isZero(0.0));
}

TEST(LogMse, SingleSampleArithmetic) {
  const std::vector<double> y{0.0};
  const LossValue v = log_mse(Matrix::Constant(1, 1, 1.0), y);
  EXPECT_DOUBLE_EQ(v.loss, 1.0);
  EXPECT_DOUBLE_EQ(v.grad(0, 0), 2.0);
}

TEST(LogMse, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n;
  std::vector<double> y(16);
  Matrix out(16, 1);
  for (int i = 0; i < 16; ++i) {
    y[i] = i % 3 == 0 ? 0.0 : std::exp(n(gen));
    out(i, 0) = n(gen);
  }
  const LossValue v = log_mse(out, y);
  const Matrix num = numeric_grad(out, [&](const Matrix& o) { return log_mse(o, y).loss; });
  EXPECT_LT(max_rel_error(v.grad, num), 1e-6);
}

TEST(LogMse, RejectsBadInput) {
  const std::vector<double> y{1.0, -1.0};
  EXPECT_THROW(log_mse(Matrix::Zero(2, 1), y), std::invalid_argument);
  const std::vector<double> short_y{1.0};
  EXPECT_THROW(log_mse(Matrix::Zero(2, 1), short_y), std::invalid_argument);
  EXPECT_THROW(log_mse(Matrix::Zero(1, 2), short_y), std::invalid_argument);
}

TEST(Ziln, ZeroLabelWithEvenOdds) {
  const std::vector<double> y{0.0};
  Matrix out(1, 3);
  out << 0.0, 0.3, 0.7;
  EXPECT_NEAR(ziln_loss(out, y).loss, std::numbers::ln2, 1e-12);
}

TEST(Ziln, StandardLognormalAtOne) {
  const std::vector<double> y{1.0};
  Matrix out(1, 3);
  out << 40.0, 0.0, inverse_softplus(1.0);
  // -log p(1) for LogNormal(0, 1) is 0.5 log(2 pi).
  EXPECT_NEAR(ziln_loss(out, y).loss, 0.9189385332, 1e-9);
}

TEST(Ziln, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n;
  std::vector<double> y(12);
  Matrix out(12, 3);
  for (int i = 0; i < 12; ++i) {
    y[i] = i % 2 == 0 ? 0.0 : std::exp(1.0 + n(gen));
    out(i, 0) = n(gen);
    out(i, 1) = 1.0 + n(gen);
    out(i, 2) = n(gen);
  }
  const LossValue v = ziln_loss(out, y);
  const Matrix num = numeric_grad(out, [&](const Matrix& o) { return ziln_loss(o, y).loss; });
  EXPECT_LT(max_rel_error(v.grad, num), 1e-4);
}

TEST(Ziln, ProbabilityOptimumAtEmpiricalRate) {
  // 3 of 10 rows positive: the loss as a function of a shared p is minimised at 0.3.
  std::vector<double> y(10, 0.0);
  y[1] = 2.0, y[4] = 5.0, y[7] = 0.5;
  const auto loss_at = [&](double p) {
    Matrix out(10, 3);
    for (int i = 0; i < 10; ++i) out.row(i) = ziln_row(p, 0.5, 1.0);
    return ziln_loss(out, y).loss;
  };
  double prev = loss_at(0.02);
  for (double p = 0.05; p <= 0.3 + 1e-12; p += 0.01) {
    const double cur = loss_at(p);
    EXPECT_LT(cur, prev) << p;
    prev = cur;
  }
  for (double p = 0.31; p < 0.99; p += 0.01) {
    const double cur = loss_at(p);
    EXPECT_GT(cur, prev) << p;
    prev = cur;
  }
}

TEST(Ziln, ScaleFloorKeepsLossFinite) {
  const std::vector<double> y{3.0};
  Matrix out(1, 3);
  out << 0.0, std::log(3.0), -800.0;
  const ZilnParams d = ziln_decode(out(0, 0), out(0, 1), out(0, 2));
  EXPECT_EQ(d.sigma, kZilnMinScale);
  const LossValue v = ziln_loss(out, y);
  EXPECT_TRUE(std::isfinite(v.loss));
  EXPECT_TRUE(v.grad.allFinite());
}

TEST(Ziln, NegativeLabelRejected) {
  const std::vector<double> y{-0.5};
  EXPECT_THROW(ziln_loss(Matrix::Zero(1, 3), y), std::invalid_argument);
}

TEST(Ziln, WrongWidthRejected) {
  const std::vector<double> y{1.0};
  EXPECT_THROW(ziln_loss(Matrix::Zero(1, 1), y), std::invalid_argument);
}

TEST(ZilnPredict, ZeroProbabilityGivesZero) {
  Matrix out(1, 3);
  out << -800.0, 2.0, 0.0;
  EXPECT_EQ(ziln_predict(out)(0), 0.0);
}

TEST(ZilnPredict, DegenerateScaleGivesExpMu) {
  Matrix out(1, 3);
  out << 800.0, 0.0, -800.0;
  EXPECT_NEAR(ziln_predict(out)(0), 1.0, 1e-12);
}

TEST(ZilnPredict, MatchesSamplingOracle) {
  const double p = 0.3, mu = 1.2, sigma = 0.6;
  std::mt19937_64 gen(3);
  std::bernoulli_distribution buy(p);
  std::lognormal_distribution<double> amount(mu, sigma);
  const int n = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += buy(gen) ? amount(gen) : 0.0;
  const double sampled = sum / n;
  const double analytic = ziln_predict(ziln_row(p, mu, sigma))(0);
  EXPECT_NEAR(analytic / sampled, 1.0, 0.02);
}

TEST(Dispatch, WidthsAndRawPrediction) {
  EXPECT_EQ(loss_output_width(LossKind::log_mse), 1);
  EXPECT_EQ(loss_output_width(LossKind::ziln), 3);
  EXPECT_EQ(parse_loss("ziln"), LossKind::ziln);
  EXPECT_EQ(to_string(LossKind::log_mse), "log_mse");
  EXPECT_THROW(parse_loss("mae"), std::invalid_argument);
  EXPECT_NEAR(raw_prediction(LossKind::log_mse, Matrix::Constant(1, 1, std::log1p(41.0)))(0), 41.0, 1e-12);
}

TEST(Softplus, StableAtExtremes) {
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_GT(softplus(-1000.0), -1.0);
  EXPECT_NEAR(softplus(0.0), std::numbers::ln2, 1e-15);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
}
