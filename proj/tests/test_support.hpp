#pragma once

#include <random>

#include "string_rope/numerics.hpp"

namespace string_rope::testing {

template <typename Scalar>
Matrix<Scalar> random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(u(rng));
  return m;
}

template <typename Scalar>
Vector<Scalar> random_vector(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return random_matrix<Scalar>(n, 1, rng, lo, hi);
}

template <typename A, typename B>
double max_abs_diff(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return (a.template cast<double>() - b.template cast<double>()).cwiseAbs().maxCoeff();
}

}  // namespace string_rope::testing
