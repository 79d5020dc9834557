#pragma once

#include "mcdltv/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcdltv {

/// Per-feature affine scaling fitted on a training split.
struct Standardization {
  RowVector mean;
  RowVector scale;  // std; features with zero variance keep scale 0 and are passed through

  Matrix apply(const Matrix& features) const;
};

/// Features plus raw (non-negative, currency-unit) labels.
struct Dataset {
  std::vector<std::string> ids;
  Matrix features;
  std::vector<double> labels;
  std::optional<Standardization> scaler;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Throws std::invalid_argument when sizes disagree, a label is negative, or a feature is NaN.
void validate(const Dataset& data);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows);

struct SynthConfig {
  std::int64_t n = 10000;
  std::int64_t dim = 16;
  double zero_rate = 0.9;
  double sigma = 0.8;
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

/// Zero-inflated lognormal spend.
///
/// Features are i.i.d. standard normal. A standardized latent score built from the first
/// (up to four) features, with tanh/sin/product nonlinearities, drives both the purchase
/// propensity sigmoid(1.5 s + b) and the log amount 2.5 + 0.7 s + sigma * eps. The offset b
/// is solved by bisection so the expected positive rate is 1 - zero_rate.
Dataset generate_synthetic(const SynthConfig& cfg);

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Header: id,f0,...,f{d-1},label. Values are written with 17 significant digits.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string to_csv(const Dataset& data);

/// Seeded, disjoint, exhaustive split; each part keeps the original row order.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_frac, std::uint64_t seed);

/// Fits mean/std on `train` and applies them to both. Zero-variance features are left as-is.
std::pair<Dataset, Dataset> standardize(const Dataset& train, const Dataset& test);
Standardization fit_standardization(const Matrix& features);

}  // namespace mcdltv
