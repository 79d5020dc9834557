#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace mcdltv {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Vector = VectorX<double>;

/// Raised when a value that must stay finite (activation, loss, gradient) is NaN or Inf.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
  if (!m.derived().allFinite()) throw NonFiniteError(what + ": non-finite value");
}

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                        const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(what + ": shape mismatch " + shape_string(a.rows(), a.cols()) +
                                " vs " + shape_string(b.rows(), b.cols()));
  }
}

/// Dense product with a fixed summation order.
///
/// Every output coefficient is accumulated over k = 0..K-1 in ascending order, starting
/// from zero, independently of how many rows the left operand has. A row's result is
/// therefore bit-identical whether it is multiplied alone or inside a larger batch.
/// Eigen's own GEMM is avoided here because its blocking depends on the operand sizes.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  static_assert(std::is_same_v<Scalar, typename DerivedB::Scalar>, "matmul: scalar mismatch");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_string(a.rows(), a.cols()) +
                                " x " + shape_string(b.rows(), b.cols()));
  }
  // Materialize both operands row-major so the inner loop is contiguous.
  const MatrixX<Scalar> lhs = a;
  const MatrixX<Scalar> rhs = b;
  const Eigen::Index n = lhs.rows(), inner = lhs.cols(), m = rhs.cols();
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar* row = out.data() + i * m;
    const Scalar* lrow = lhs.data() + i * inner;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const Scalar s = lrow[k];
      const Scalar* rrow = rhs.data() + k * m;
      for (Eigen::Index j = 0; j < m; ++j) row[j] += s * rrow[j];
    }
  }
  return out;
}

/// Sum over rows in ascending row order (fixed reduction order).
template <typename Derived>
RowVectorX<typename Derived::Scalar> column_sums(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  RowVectorX<Scalar> out = RowVectorX<Scalar>::Zero(a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(j) += a(i, j);
  }
  return out;
}

}  // namespace mcdltv
