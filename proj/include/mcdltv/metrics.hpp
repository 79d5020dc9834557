#pragma once

#include "mcdltv/mcd.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mcdltv {

/// Lorenz-curve Gini of `actual` ordered by `pred` descending (ties: lower index first).
double gini(std::span<const double> actual, std::span<const double> pred);

/// gini(actual, pred) / gini(actual, actual). Needs N >= 2 and a positive label sum.
/// Tied predictions are ordered by index rather than averaged, so a constant predictor's
/// score depends on row order.
double normalized_gini(std::span<const double> preds, std::span<const double> labels);

/// ceil(k N), clamped to [1, N].
std::size_t top_k_count(double k, std::size_t n);

/// Indices of the `count` largest values, ties broken by ascending index.
std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count);

enum class Cohort { by_label, by_prediction };

/// Mean |y - ŷ| / y over the top ceil(kN) rows. The cohort is chosen by true label unless
/// `cohort` says otherwise; a zero label inside it is an error (k too large for the data).
double top_k_mape(std::span<const double> preds_raw, std::span<const double> labels_raw, double k,
                  Cohort cohort = Cohort::by_label);

/// |top ceil(kN) by prediction ∩ top ceil(kN) by label| / ceil(kN).
double top_k_hit_rate(std::span<const double> preds, std::span<const double> labels, double k);

struct CurvePoint {
  double z;
  double accuracy;
};

/// Coverage of each CI level: fraction of labels (model output space) inside
/// confidence_interval(summary, z).
std::vector<CurvePoint> confidence_curve(std::span<const PredictionSummary> summaries,
                                         std::span<const double> labels_model_space,
                                         std::span<const double> z_grid,
                                         IntervalMode mode = IntervalMode::literal);

/// 0, 0.05, ..., 1.
std::vector<double> default_z_grid();

/// "start:stop:step", inclusive of stop.
std::vector<double> parse_z_grid(const std::string& text);

struct MetricsReport {
  double normalized_gini = 0.0;
  double k = 0.05;
  double top_k_mape = 0.0;
  double top_k_hit_rate = 0.0;
  std::vector<CurvePoint> confidence_curve;
  std::size_t sample_count = 0;
};

nlohmann::json to_json(const MetricsReport& r);
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace mcdltv
