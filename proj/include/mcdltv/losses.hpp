#pragma once

#include "mcdltv/matrix.hpp"

#include <span>
#include <string>

namespace mcdltv {

enum class LossKind { log_mse, ziln };

std::string to_string(LossKind kind);
LossKind parse_loss(const std::string& name);
/// Width of the network output each loss expects: 1 for log-MSE, 3 for ZILN.
Eigen::Index loss_output_width(LossKind kind);

struct LossValue {
  double loss = 0.0;
  Matrix grad;  // d loss / d output, same shape as the output
};

/// Smallest permitted lognormal scale after the softplus transform.
inline constexpr double kZilnMinScale = 1e-6;

/// Decoded ZILN head for one sample: purchase probability, lognormal location and scale.
struct ZilnParams {
  double p;
  double mu;
  double sigma;
};

/// Columns of a ZILN output row are (purchase logit, mu, raw scale).
ZilnParams ziln_decode(double logit, double mu, double raw_scale);

/// Mean squared error between the output column and log1p(label).
LossValue log_mse(const Matrix& output, std::span<const double> labels);

/// Zero-inflated lognormal negative log-likelihood, averaged over the batch.
LossValue ziln_loss(const Matrix& head, std::span<const double> labels);

/// Expected raw amount p * exp(mu + sigma^2 / 2), one per row.
Vector ziln_predict(const Matrix& head);

/// Dispatch on kind.
LossValue evaluate_loss(LossKind kind, const Matrix& output, std::span<const double> labels);

/// Convert a network output to a point prediction in raw currency units:
/// expm1 of the single column for log-MSE, the ZILN expectation otherwise.
Vector raw_prediction(LossKind kind, const Matrix& output);

double softplus(double x);
double sigmoid(double x);

}  // namespace mcdltv
