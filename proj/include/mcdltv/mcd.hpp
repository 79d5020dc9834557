#pragma once

#include "mcdltv/data.hpp"
#include "mcdltv/losses.hpp"
#include "mcdltv/nn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mcdltv {

struct McdConfig {
  int trials = 64;
  std::uint64_t seed = 0;
  Eigen::Index batch_size = 4096;
  bool keep_trials = false;
  int threads = 1;
};

/// Per-sample Monte Carlo dropout result. `mean` and `std` live in the model output
/// space: log1p(amount) for log-MSE models, raw amount for ZILN models.
struct PredictionSummary {
  std::string id;
  std::vector<double> trials;  // only filled when McdConfig::keep_trials is set
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (T - 1 denominator), 0 when T == 1
  int trial_count = 1;
};

/// Mask stream of trial j: labelled "mcd/<j>" under the master seed.
RngStream mcd_trial_stream(std::uint64_t seed, int trial);

/// Scalar per row that MCD aggregates: the log-space output column for log-MSE,
/// the expected raw amount for ZILN.
Vector model_space_output(LossKind kind, const Matrix& output);

/// T x N matrix of per-trial outputs. Trial j samples one mask set from its own stream and
/// applies it to every row; trials may run on several threads without affecting results.
Matrix mcd_trial_outputs(const Network& net, const Matrix& features, LossKind kind,
                         const McdConfig& cfg);

/// Mean (ascending trial order) and sample std of a recorded trial vector. A vector whose
/// entries are all equal yields that value and std 0 exactly.
void summarize_trials(std::span<const double> trials, double& mean, double& std);

/// T stochastic passes over the whole dataset, then per-sample mean and std.
std::vector<PredictionSummary> mcd_predict(const Network& net, const Dataset& data, LossKind kind,
                                           const McdConfig& cfg);

/// How z turns into an interval half-width multiplier.
///   literal:  z itself, 0 <= z <= 1.
///   quantile: z is a two-sided Gaussian coverage level, multiplier Phi^-1((1 + z) / 2).
enum class IntervalMode { literal, quantile };

struct Interval {
  double lo;
  double hi;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// mean ± m(z) * std / sqrt(T), closed.
Interval confidence_interval(const PredictionSummary& s, double z,
                             IntervalMode mode = IntervalMode::literal);

/// Inverse of the standard normal CDF on (0, 1).
double normal_quantile(double p);

}  // namespace mcdltv
