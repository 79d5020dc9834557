#include "mcdltv/mcd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace mcdltv {

RngStream mcd_trial_stream(std::uint64_t seed, int trial) {
  return RngStream(seed, "mcd/" + std::to_string(trial));
}

Vector model_space_output(LossKind kind, const Matrix& output) {
  if (kind == LossKind::ziln) return ziln_predict(output);
  if (output.cols() != 1) throw std::invalid_argument("log-MSE model output must be 1 column");
  return output.col(0);
}

Matrix mcd_trial_outputs(const Network& net, const Matrix& features, LossKind kind,
                         const McdConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("mcd: trial count must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("mcd: batch_size must be >= 1");
  if (features.cols() != net.input_dim) {
    throw std::invalid_argument("mcd: data has " + std::to_string(features.cols()) +
                                " features, network expects " + std::to_string(net.input_dim));
  }
  const Eigen::Index n = features.rows();
  Matrix out(cfg.trials, n);

  const auto run_trial = [&](int j) {
    RngStream stream = mcd_trial_stream(cfg.seed, j);
    const MaskSet masks = sample_masks(net, stream, j);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min(cfg.batch_size, n - start);
      const Matrix y = infer(net, features.middleRows(start, len), &masks);
      out.row(j).segment(start, len) = model_space_output(kind, y).transpose();
    }
  };

  const int workers = std::max(1, std::min(cfg.threads, cfg.trials));
  if (workers == 1) {
    for (int j = 0; j < cfg.trials; ++j) run_trial(j);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int j = w; j < cfg.trials; j += workers) run_trial(j);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

void summarize_trials(std::span<const double> trials, double& mean, double& std) {
  if (trials.empty()) throw std::invalid_argument("summarize_trials: empty trial vector");
  // Identical trials (no active dropout) average to themselves; sum / T may be off by an ulp.
  if (std::all_of(trials.begin(), trials.end(), [&](double v) { return v == trials[0]; })) {
    mean = trials[0];
    std = 0.0;
    return;
  }
  double sum = 0.0;
  for (double v : trials) sum += v;
  mean = sum / static_cast<double>(trials.size());
  if (trials.size() == 1) {
    std = 0.0;
    return;
  }
  double ss = 0.0;
  for (double v : trials) ss += (v - mean) * (v - mean);
  std = std::sqrt(ss / static_cast<double>(trials.size() - 1));
}

std::vector<PredictionSummary> mcd_predict(const Network& net, const Dataset& data, LossKind kind,
                                           const McdConfig& cfg) {
  const Matrix trials = mcd_trial_outputs(net, data.features, kind, cfg);
  std::vector<PredictionSummary> out(data.size());
  std::vector<double> column(static_cast<std::size_t>(cfg.trials));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int j = 0; j < cfg.trials; ++j) {
      column[static_cast<std::size_t>(j)] = trials(j, static_cast<Eigen::Index>(i));
    }
    PredictionSummary& s = out[i];
    s.id = data.ids[i];
    s.trial_count = cfg.trials;
    summarize_trials(column, s.mean, s.std);
    if (cfg.keep_trials) s.trials = column;
  }
  return out;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("normal_quantile: p must lie in [0, 1]");
  }
  // Acklam's rational approximation followed by one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

Interval confidence_interval(const PredictionSummary& s, double z, IntervalMode mode) {
  if (!(z >= 0.0 && z <= 1.0)) throw std::invalid_argument("confidence_interval: z must lie in [0, 1]");
  if (s.trial_count < 1) throw std::invalid_argument("confidence_interval: trial_count must be >= 1");
  if (s.std == 0.0) return {s.mean, s.mean};
  const double multiplier = mode == IntervalMode::literal ? z : normal_quantile(0.5 * (1.0 + z));
  const double half = multiplier * s.std / std::sqrt(static_cast<double>(s.trial_count));
  return {s.mean - half, s.mean + half};
}

}  // namespace mcdltv
