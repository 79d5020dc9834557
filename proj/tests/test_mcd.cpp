#include "mcdltv/mcd.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mcdltv;

namespace {

Dataset random_dataset(std::size_t n, Eigen::Index dim, std::uint64_t seed) {
  RngStream rng(seed, "test/mcd-data");
  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(n), dim);
  for (Eigen::Index i = 0; i < d.features.size(); ++i) d.features.data()[i] = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    d.ids.push_back("r" + std::to_string(i));
    d.labels.push_back(0.0);
  }
  return d;
}

PredictionSummary summary(double mean, double std, int t) {
  PredictionSummary s;
  s.mean = mean;
  s.std = std;
  s.trial_count = t;
  return s;
}

}  // namespace

TEST(McdPredict, ZeroDropoutMatchesEval) {
  const Network net = build_dcnv2(5, 2, {16, 8}, 0.0, 1);
  const Dataset d = random_dataset(50, 5, 2);
  const Matrix eval = predict_eval(net, d.features);
  for (int t : {1, 2, 7}) {
    McdConfig cfg;
    cfg.trials = t;
    const auto out = mcd_predict(net, d, LossKind::log_mse, cfg);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].mean, eval(static_cast<Eigen::Index>(i), 0));
      EXPECT_EQ(out[i].std, 0.0);
    }
  }
}

TEST(Summarize, TwoTrialArithmetic) {
  const double trials[] = {2.0, 4.0};
  double mean, sd;
  summarize_trials(trials, mean, sd);
  EXPECT_EQ(mean, 3.0);
  EXPECT_EQ(sd, std::sqrt(2.0));
}

TEST(Summarize, SingleTrialHasZeroStd) {
  const double trials[] = {5.5};
  double mean, sd;
  summarize_trials(trials, mean, sd);
  EXPECT_EQ(mean, 5.5);
  EXPECT_EQ(sd, 0.0);
}

TEST(McdPredict, MatchesExternalReplay) {
  const Network net = build_mlp(6, {32, 16}, 0.3, 3);
  const Dataset d = random_dataset(40, 6, 4);
  McdConfig cfg;
  cfg.trials = 25;
  cfg.seed = 77;
  cfg.batch_size = 7;
  cfg.keep_trials = true;
  const auto out = mcd_predict(net, d, LossKind::log_mse, cfg);

  Vector sum = Vector::Zero(40);
  std::vector<Vector> per_trial;
  for (int j = 0; j < cfg.trials; ++j) {
    RngStream stream(77, "mcd/" + std::to_string(j));
    const MaskSet masks = sample_masks(net, stream, j);
    per_trial.push_back(infer(net, d.features, &masks).col(0));
    sum += per_trial.back();
  }
  for (Eigen::Index i = 0; i < 40; ++i) {
    const auto& s = out[static_cast<std::size_t>(i)];
    EXPECT_EQ(s.mean, sum(i) / cfg.trials);
    ASSERT_NE(per_trial[0](i), per_trial[1](i));
    double ss = 0.0;
    for (const Vector& v : per_trial) ss += (v(i) - s.mean) * (v(i) - s.mean);
    EXPECT_EQ(s.std, std::sqrt(ss / (cfg.trials - 1)));
    ASSERT_EQ(s.trials.size(), 25u);
    EXPECT_EQ(s.trials[3], per_trial[3](i));
    EXPECT_GT(s.std, 0.0);
  }
}

TEST(McdPredict, InvariantToThreadsAndBatching) {
  const Network net = build_dcnv2(6, 2, {24, 12}, 0.2, 5, 3);
  const Dataset d = random_dataset(101, 6, 6);
  McdConfig base;
  base.trials = 13;
  base.seed = 9;
  const auto ref = mcd_predict(net, d, LossKind::ziln, base);
  for (int threads : {2, 4}) {
    for (Eigen::Index batch : {1, 10, 4096}) {
      McdConfig cfg = base;
      cfg.threads = threads;
      cfg.batch_size = batch;
      const auto out = mcd_predict(net, d, LossKind::ziln, cfg);
      for (std::size_t i = 0; i < out.size(); ++i) {
        ASSERT_EQ(out[i].mean, ref[i].mean);
        ASSERT_EQ(out[i].std, ref[i].std);
      }
    }
  }
}

TEST(McdPredict, SeedChangesMasks) {
  const Network net = build_mlp(4, {16}, 0.5, 7);
  const Dataset d = random_dataset(5, 4, 8);
  McdConfig a, b;
  a.trials = b.trials = 8;
  b.seed = 1;
  EXPECT_NE(mcd_predict(net, d, LossKind::log_mse, a)[0].mean,
            mcd_predict(net, d, LossKind::log_mse, b)[0].mean);
}

TEST(McdPredict, RejectsBadInput) {
  const Network net = build_mlp(4, {8}, 0.1, 1);
  McdConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(mcd_predict(net, random_dataset(3, 4, 1), LossKind::log_mse, cfg), std::invalid_argument);
  cfg.trials = 2;
  EXPECT_THROW(mcd_predict(net, random_dataset(3, 5, 1), LossKind::log_mse, cfg), std::invalid_argument);
}

TEST(Interval, LiteralExample) {
  const Interval ci = confidence_interval(summary(3.0, std::sqrt(2.0), 2), 0.9);
  EXPECT_NEAR(ci.lo, 2.1, 1e-12);
  EXPECT_NEAR(ci.hi, 3.9, 1e-12);
}

TEST(Interval, DegenerateCases) {
  const Interval z0 = confidence_interval(summary(3.0, 1.0, 4), 0.0);
  EXPECT_EQ(z0.lo, 3.0);
  EXPECT_EQ(z0.hi, 3.0);
  for (double z : {0.0, 0.3, 1.0}) {
    const Interval ci = confidence_interval(summary(-1.5, 0.0, 9), z);
    EXPECT_EQ(ci.lo, -1.5);
    EXPECT_EQ(ci.hi, -1.5);
    EXPECT_TRUE(ci.contains(-1.5));
  }
}

TEST(Interval, WidthMonotoneInZ) {
  for (IntervalMode mode : {IntervalMode::literal, IntervalMode::quantile}) {
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const Interval ci = confidence_interval(summary(1.0, 0.7, 16), i / 100.0, mode);
      const double w = ci.hi - ci.lo;
      if (i > 0) EXPECT_GT(w, prev);
      prev = w;
    }
  }
}

TEST(Interval, ZOutOfRangeThrows) {
  EXPECT_THROW(confidence_interval(summary(0, 1, 2), -0.01), std::invalid_argument);
  EXPECT_THROW(confidence_interval(summary(0, 1, 2), 1.01), std::invalid_argument);
  EXPECT_THROW(confidence_interval(summary(0, 1, 2), std::nan("")), std::invalid_argument);
}

TEST(Interval, QuantileModeUsesGaussianMultiplier) {
  const Interval ci = confidence_interval(summary(0.0, 2.0, 4), 0.95, IntervalMode::quantile);
  EXPECT_NEAR(ci.hi, 1.959963984540054, 1e-12);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-14);
  EXPECT_NEAR(normal_quantile(0.8413447460685429), 1.0, 1e-13);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-10);
  EXPECT_NEAR(normal_quantile(0.3), -normal_quantile(0.7), 1e-15);
}
