#include "mcdltv/metrics.hpp"

#include "mcdltv/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mcdltv {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw std::invalid_argument(std::string(what) + ": non-finite value at row " + std::to_string(i));
    }
  }
}

void check_k(double k, const char* what) {
  if (!(k > 0.0 && k <= 1.0)) throw std::invalid_argument(std::string(what) + ": k must lie in (0, 1]");
}

std::vector<std::size_t> descending_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

}  // namespace

double gini(std::span<const double> actual, std::span<const double> pred) {
  check_pair(actual, pred, "gini");
  const double total = std::accumulate(actual.begin(), actual.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("gini: labels sum to zero");
  const auto n = static_cast<double>(actual.size());
  double cum = 0.0, acc = 0.0;
  for (std::size_t idx : descending_order(pred)) {
    cum += actual[idx];
    acc += cum / total;
  }
  return acc / n - (n + 1.0) / (2.0 * n);
}

double normalized_gini(std::span<const double> preds, std::span<const double> labels) {
  check_pair(preds, labels, "normalized_gini");
  if (labels.size() < 2) throw std::invalid_argument("normalized_gini: need at least 2 samples");
  for (double y : labels) {
    if (y < 0.0) throw std::invalid_argument("normalized_gini: negative label");
  }
  if (std::all_of(labels.begin(), labels.end(), [&](double y) { return y == labels[0]; })) {
    throw std::invalid_argument("normalized_gini: labels carry no ordering (all equal)");
  }
  const double perfect = gini(labels, labels);
  if (!(perfect > 0.0)) throw std::invalid_argument("normalized_gini: labels carry no ordering (all equal)");
  return gini(labels, preds) / perfect;
}

std::size_t top_k_count(double k, std::size_t n) {
  check_k(k, "top_k_count");
  // The slack keeps k N that is integral up to rounding (0.05 * 100) from rounding up.
  const double raw = std::ceil(k * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t count) {
  std::vector<std::size_t> order = descending_order(values);
  order.resize(std::min(count, order.size()));
  return order;
}

double top_k_mape(std::span<const double> preds_raw, std::span<const double> labels_raw, double k,
                  Cohort cohort) {
  check_pair(preds_raw, labels_raw, "top_k_mape");
  check_k(k, "top_k_mape");
  const std::size_t m = top_k_count(k, labels_raw.size());
  const auto chosen = top_indices(cohort == Cohort::by_label ? labels_raw : preds_raw, m);
  double sum = 0.0;
  for (std::size_t i : chosen) {
    if (!(labels_raw[i] > 0.0)) {
      throw std::invalid_argument("top_k_mape: zero label at row " + std::to_string(i) +
                                  " inside the top-" + std::to_string(m) + " cohort; k is too large");
    }
    sum += std::abs(labels_raw[i] - preds_raw[i]) / labels_raw[i];
  }
  return sum / static_cast<double>(m);
}

double top_k_hit_rate(std::span<const double> preds, std::span<const double> labels, double k) {
  check_pair(preds, labels, "top_k_hit_rate");
  check_k(k, "top_k_hit_rate");
  const std::size_t m = top_k_count(k, labels.size());
  auto by_pred = top_indices(preds, m);
  auto by_label = top_indices(labels, m);
  std::sort(by_pred.begin(), by_pred.end());
  std::sort(by_label.begin(), by_label.end());
  std::vector<std::size_t> common;
  std::set_intersection(by_pred.begin(), by_pred.end(), by_label.begin(), by_label.end(),
                        std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(m);
}

std::vector<CurvePoint> confidence_curve(std::span<const PredictionSummary> summaries,
                                         std::span<const double> labels_model_space,
                                         std::span<const double> z_grid, IntervalMode mode) {
  if (summaries.size() != labels_model_space.size()) {
    throw std::invalid_argument("confidence_curve: summaries and labels differ in length");
  }
  if (summaries.empty()) throw std::invalid_argument("confidence_curve: no samples");
  for (std::size_t g = 0; g < z_grid.size(); ++g) {
    if (!(z_grid[g] >= 0.0 && z_grid[g] <= 1.0)) {
      throw std::invalid_argument("confidence_curve: z outside [0, 1]");
    }
    if (g > 0 && !(z_grid[g] > z_grid[g - 1])) {
      throw std::invalid_argument("confidence_curve: z grid must be strictly increasing");
    }
  }
  std::vector<CurvePoint> curve;
  curve.reserve(z_grid.size());
  for (double z : z_grid) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      hits += confidence_interval(summaries[i], z, mode).contains(labels_model_space[i]);
    }
    curve.push_back({z, static_cast<double>(hits) / static_cast<double>(summaries.size())});
  }
  return curve;
}

std::vector<double> default_z_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

std::vector<double> parse_z_grid(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.empty()) throw std::invalid_argument("z grid: cannot parse '" + item + "'");
    parts.push_back(v);
  }
  if (parts.size() != 3) throw std::invalid_argument("z grid must be start:stop:step");
  const double start = parts[0], stop = parts[1], step = parts[2];
  if (!(step > 0.0) || stop < start) throw std::invalid_argument("z grid: need step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  std::vector<double> grid;
  for (long i = 0; i <= count; ++i) grid.push_back(std::min(stop, start + static_cast<double>(i) * step));
  return grid;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const CurvePoint& p : r.confidence_curve) curve.push_back({{"z", p.z}, {"accuracy", p.accuracy}});
  return {{"normalized_gini", r.normalized_gini},
          {"k", r.k},
          {"top_k_mape", r.top_k_mape},
          {"top_k_hit_rate", r.top_k_hit_rate},
          {"confidence_curve", curve},
          {"sample_count", r.sample_count}};
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "z,accuracy\n";
  for (const CurvePoint& p : curve) out << format_double(p.z) << ',' << format_double(p.accuracy) << '\n';
  return out.str();
}

}  // namespace mcdltv
