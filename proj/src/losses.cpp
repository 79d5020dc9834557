#include "mcdltv/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mcdltv {

std::string to_string(LossKind kind) { return kind == LossKind::log_mse ? "log_mse" : "ziln"; }

LossKind parse_loss(const std::string& name) {
  if (name == "log_mse") return LossKind::log_mse;
  if (name == "ziln") return LossKind::ziln;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

Eigen::Index loss_output_width(LossKind kind) { return kind == LossKind::log_mse ? 1 : 3; }

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void check_batch(const Matrix& out, std::span<const double> labels, Eigen::Index width,
                 const char* what) {
  if (out.cols() != width) {
    throw std::invalid_argument(std::string(what) + ": output must have " + std::to_string(width) +
                                " column(s), got " + std::to_string(out.cols()));
  }
  if (static_cast<std::size_t>(out.rows()) != labels.size()) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(out.rows()) +
                                " outputs but " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(labels[i] >= 0.0) || !std::isfinite(labels[i])) {
      throw std::invalid_argument(std::string(what) + ": label " + std::to_string(i) +
                                  " is negative or non-finite");
    }
  }
}

}  // namespace

ZilnParams ziln_decode(double logit, double mu, double raw_scale) {
  return {sigmoid(logit), mu, std::max(softplus(raw_scale), kZilnMinScale)};
}

LossValue log_mse(const Matrix& output, std::span<const double> labels) {
  check_batch(output, labels, 1, "log_mse");
  const auto n = static_cast<double>(labels.size());
  LossValue r;
  r.grad.resize(output.rows(), 1);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < output.rows(); ++i) {
    const double diff = output(i, 0) - std::log1p(labels[i]);
    sum += diff * diff;
    r.grad(i, 0) = 2.0 * diff / n;
  }
  r.loss = sum / n;
  if (!std::isfinite(r.loss)) throw NonFiniteError("log_mse: non-finite loss");
  return r;
}

LossValue ziln_loss(const Matrix& head, std::span<const double> labels) {
  check_batch(head, labels, 3, "ziln_loss");
  const auto n = static_cast<double>(labels.size());
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  LossValue r;
  r.grad = Matrix::Zero(head.rows(), 3);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < head.rows(); ++i) {
    const double logit = head(i, 0), mu = head(i, 1), s = head(i, 2);
    const double y = labels[i];
    if (y == 0.0) {
      // -log(1 - sigmoid(logit)) == softplus(logit)
      sum += softplus(logit);
      r.grad(i, 0) = sigmoid(logit) / n;
      continue;
    }
    const double raw_sigma = softplus(s);
    const bool floored = raw_sigma < kZilnMinScale;
    const double sigma = floored ? kZilnMinScale : raw_sigma;
    const double log_y = std::log(y);
    const double resid = log_y - mu;
    const double var = sigma * sigma;
    // -log p == softplus(-logit); -logpdf = log y + log sigma + log sqrt(2 pi) + resid^2 / 2 var
    sum += softplus(-logit) + log_y + std::log(sigma) + half_log_2pi + resid * resid / (2.0 * var);
    r.grad(i, 0) = (sigmoid(logit) - 1.0) / n;
    r.grad(i, 1) = -resid / var / n;
    const double d_sigma = 1.0 / sigma - resid * resid / (var * sigma);
    r.grad(i, 2) = floored ? 0.0 : d_sigma * sigmoid(s) / n;
  }
  r.loss = sum / n;
  if (!std::isfinite(r.loss)) throw NonFiniteError("ziln_loss: non-finite loss");
  require_finite(r.grad, "ziln_loss gradient");
  return r;
}

Vector ziln_predict(const Matrix& head) {
  if (head.cols() != 3) throw std::invalid_argument("ziln_predict: head must have 3 columns");
  Vector out(head.rows());
  for (Eigen::Index i = 0; i < head.rows(); ++i) {
    const ZilnParams z = ziln_decode(head(i, 0), head(i, 1), head(i, 2));
    out(i) = z.p * std::exp(z.mu + 0.5 * z.sigma * z.sigma);
  }
  return out;
}

LossValue evaluate_loss(LossKind kind, const Matrix& output, std::span<const double> labels) {
  return kind == LossKind::log_mse ? log_mse(output, labels) : ziln_loss(output, labels);
}

Vector raw_prediction(LossKind kind, const Matrix& output) {
  if (kind == LossKind::ziln) return ziln_predict(output);
  if (output.cols() != 1) throw std::invalid_argument("raw_prediction: log-MSE output must be 1 column");
  Vector out(output.rows());
  for (Eigen::Index i = 0; i < output.rows(); ++i) out(i) = std::expm1(output(i, 0));
  return out;
}

}  // namespace mcdltv
