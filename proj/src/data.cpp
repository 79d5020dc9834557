#include "mcdltv/data.hpp"

#include "mcdltv/io.hpp"
#include "mcdltv/losses.hpp"
#include "mcdltv/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mcdltv {

Matrix Standardization::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) {
    throw std::invalid_argument("standardization: fitted on " + std::to_string(mean.size()) +
                                " features, got " + std::to_string(features.cols()));
  }
  Matrix out = features;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (scale(j) == 0.0) continue;
    out.col(j) = ((out.col(j).array() - mean(j)) / scale(j)).matrix();
  }
  return out;
}

void validate(const Dataset& data) {
  if (static_cast<std::size_t>(data.features.rows()) != data.labels.size() ||
      data.ids.size() != data.labels.size()) {
    throw std::invalid_argument("dataset: ids, feature rows and labels differ in length");
  }
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (!(data.labels[i] >= 0.0) || !std::isfinite(data.labels[i])) {
      throw std::invalid_argument("dataset: label at row " + std::to_string(i) +
                                  " is negative or non-finite");
    }
  }
  if (data.features.hasNaN()) throw std::invalid_argument("dataset: NaN feature");
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.ids.reserve(rows.size());
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t src = rows[r];
    if (src >= data.size()) throw std::out_of_range("subset: row index out of range");
    out.ids.push_back(data.ids[src]);
    out.labels.push_back(data.labels[src]);
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(src));
  }
  out.scaler = data.scaler;
  return out;
}

void validate(const SynthConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("synth config: n must be >= 1");
  if (cfg.dim < 1) throw std::invalid_argument("synth config: dim must be >= 1");
  if (!(cfg.zero_rate >= 0.0 && cfg.zero_rate <= 1.0)) {
    throw std::invalid_argument("synth config: zero_rate must lie in [0, 1]");
  }
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) {
    throw std::invalid_argument("synth config: sigma must be positive");
  }
}

namespace {

// Offset b with mean_i sigmoid(slope * s_i + b) == target, by bisection.
double solve_offset(const std::vector<double>& score, double slope, double target) {
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double rate = 0.0;
    for (double s : score) rate += sigmoid(slope * s + mid);
    rate /= static_cast<double>(score.size());
    (rate < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  constexpr double kPropensitySlope = 1.5;
  constexpr double kLogAmountBase = 2.5;
  constexpr double kLogAmountSlope = 0.7;

  const auto n = static_cast<Eigen::Index>(cfg.n);
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  Dataset data;
  data.features.resize(n, d);
  RngStream feat(cfg.seed, "synth/features");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = feat.normal();
  }

  std::vector<double> score(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = data.features.row(i);
    double s = x(0);
    if (d > 1) s += 0.8 * std::tanh(1.5 * x(1));
    if (d > 2) s += 0.5 * std::sin(2.0 * x(2));
    if (d > 3) s += 0.4 * x(0) * x(3);
    score[static_cast<std::size_t>(i)] = s;
  }
  const double mean = std::accumulate(score.begin(), score.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double s : score) var += (s - mean) * (s - mean);
  const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n)) : 0.0;
  for (double& s : score) s = sd > 0.0 ? (s - mean) / sd : 0.0;

  const double target = 1.0 - cfg.zero_rate;
  const double offset = (target > 0.0 && target < 1.0) ? solve_offset(score, kPropensitySlope, target) : 0.0;

  RngStream purchase(cfg.seed, "synth/purchase");
  RngStream amount(cfg.seed, "synth/amount");
  data.labels.resize(static_cast<std::size_t>(n));
  data.ids.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double u = purchase.uniform();
    const double eps = amount.normal();
    bool buys;
    if (target <= 0.0) buys = false;
    else if (target >= 1.0) buys = true;
    else buys = u < sigmoid(kPropensitySlope * score[i] + offset);
    data.labels[i] = buys ? std::exp(kLogAmountBase + kLogAmountSlope * score[i] + cfg.sigma * eps) : 0.0;
    data.ids[i] = std::to_string(i);
  }
  return data;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view field, std::size_t line, const char* what) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw CsvError(std::string("cannot parse ") + what + " '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  const auto next = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next()) throw CsvError("missing header", 1);
  const auto header = split_fields(line);
  if (header.size() < 3 || header.front() != "id" || header.back() != "label") {
    throw CsvError("header must be id,f0,...,label", line_no);
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j + 1] != "f" + std::to_string(j)) {
      throw CsvError("feature column " + std::to_string(j) + " must be named f" + std::to_string(j), line_no);
    }
  }

  Dataset data;
  std::vector<double> flat;
  while (next()) {
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw CsvError("expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()),
                     line_no);
    }
    data.ids.emplace_back(fields.front());
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = parse_double(fields[j + 1], line_no, "feature");
      if (std::isnan(v)) throw CsvError("NaN feature", line_no);
      flat.push_back(v);
    }
    const double label = parse_double(fields.back(), line_no, "label");
    if (!(label >= 0.0) || !std::isfinite(label)) throw CsvError("label must be a finite non-negative amount", line_no);
    data.labels.push_back(label);
  }
  data.features = Eigen::Map<const Matrix>(flat.data(), static_cast<Eigen::Index>(data.labels.size()),
                                           static_cast<Eigen::Index>(dim));
  return data;
}

std::string to_csv(const Dataset& data) {
  validate(data);
  std::ostringstream out;
  out << "id";
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << ",label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.ids[i];
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
      out << ',' << format_double(data.features(static_cast<Eigen::Index>(i), j));
    }
    out << ',' << format_double(data.labels[i]) << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, to_csv(data));
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::invalid_argument("split: train_frac must lie in (0, 1)");
  }
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split: " + std::to_string(n) + " rows at fraction " +
                                std::to_string(train_frac) + " leaves an empty part");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(seed, "data/split");
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {subset(data, train), subset(data, test)};
}

Standardization fit_standardization(const Matrix& features) {
  if (features.rows() == 0) throw std::invalid_argument("standardize: empty training set");
  const auto n = static_cast<double>(features.rows());
  Standardization s;
  s.mean = column_sums(features) / n;
  s.scale = RowVector::Zero(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const double dev = features(i, j) - s.mean(j);
      ss += dev * dev;
    }
    const double sd = std::sqrt(ss / n);
    // Relative threshold: constant columns leave only rounding noise in ss.
    s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 0.0;
  }
  return s;
}

std::pair<Dataset, Dataset> standardize(const Dataset& train, const Dataset& test) {
  const Standardization s = fit_standardization(train.features);
  Dataset a = train, b = test;
  a.features = s.apply(train.features);
  b.features = s.apply(test.features);
  a.scaler = s;
  b.scaler = s;
  return {std::move(a), std::move(b)};
}

}  // namespace mcdltv
