#pragma once

#include "mcdltv/matrix.hpp"

#include <cstdint>
#include <vector>

namespace mcdltv {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are allocated lazily on the first step
/// to mirror the shapes of the parameters passed in.
class AdamState {
 public:
  explicit AdamState(AdamOptions options = {}) : options_(options) {}

  /// One update. `params` and `grads` are matched by position.
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);

  std::int64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t step_ = 0;
};

}  // namespace mcdltv
