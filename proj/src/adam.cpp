#include "mcdltv/adam.hpp"

#include <cmath>

namespace mcdltv {

void AdamState::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam: " + std::to_string(params.size()) + " params but " +
                                std::to_string(grads.size()) + " gradients");
  }
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "adam gradient " + std::to_string(i));
    require_same_shape(*params[i], m_[i], "adam moment " + std::to_string(i));
    require_finite(*grads[i], "adam gradient " + std::to_string(i));
  }

  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    const Matrix m_hat = m_[i] / c1;
    const Matrix v_hat = v_[i] / c2;
    *params[i] -= options_.learning_rate *
                  m_hat.cwiseQuotient((v_hat.array().sqrt() + options_.epsilon).matrix());
  }
}

}  // namespace mcdltv
