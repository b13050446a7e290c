#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

#include "string_rope/errors.hpp"

namespace string_rope {

using Index = Eigen::Index;

// Row-major so attention passes can stream query rows.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Precision { single, double_ };

template <typename Scalar>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>,
                "only float and double are supported");
  return std::is_same_v<Scalar, float> ? Precision::single : Precision::double_;
}

inline const char* to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

// Tolerances are keyed to precision; each pair is {single, double}.
struct Tolerance {
  double single;
  double double_;
  constexpr double operator()(Precision p) const { return p == Precision::single ? single : double_; }
  template <typename Scalar>
  constexpr double of() const { return (*this)(precision_of<Scalar>()); }
};

inline constexpr Tolerance kMatmulTolerance{1e-6, 1e-12};
inline constexpr Tolerance kRopeTolerance{1e-5, 1e-10};
inline constexpr Tolerance kAttentionTolerance{1e-4, 1e-9};
inline constexpr Tolerance kLogitsTolerance{1e-3, 1e-8};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(static_cast<double>(m(i, j)))) return false;
  return true;
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
  if (!all_finite(m)) throw ContractViolation(what + ": non-finite entry");
}

// Dot product accumulated in double, left to right.
template <typename DerivedA, typename DerivedB>
double dot_acc(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  double acc = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a.coeff(i)) * static_cast<double>(b.coeff(i));
  return acc;
}

// Plain product with double accumulation in a fixed k-order, so results are
// reproducible for a given build regardless of Eigen's kernel selection.
template <typename Scalar>
Matrix<Scalar> matmul(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.cols() != b.rows())
    throw ContractViolation("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()) + ")");
  Matrix<Scalar> out(a.rows(), b.cols());
  Eigen::VectorXd acc(b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    acc.setZero();
    for (Index k = 0; k < a.cols(); ++k) {
      const double aik = static_cast<double>(a(i, k));
      for (Index j = 0; j < b.cols(); ++j) acc[j] += aik * static_cast<double>(b(k, j));
    }
    out.row(i) = acc.transpose().template cast<Scalar>();
  }
  require_finite(out, "matmul");
  return out;
}

template <typename Derived>
double logsumexp(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw ContractViolation("logsumexp: empty vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) mx = std::max(mx, static_cast<double>(v.coeff(i)));
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) sum += std::exp(static_cast<double>(v.coeff(i)) - mx);
  return mx + std::log(sum);
}

template <typename Derived>
Vector<typename Derived::Scalar> stable_softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw ContractViolation("stable_softmax: empty vector");
  require_finite(v, "stable_softmax input");
  double mx = static_cast<double>(v.coeff(0));
  for (Index i = 1; i < v.size(); ++i) mx = std::max(mx, static_cast<double>(v.coeff(i)));
  Eigen::VectorXd e(v.size());
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    e[i] = std::exp(static_cast<double>(v.coeff(i)) - mx);
    sum += e[i];
  }
  return (e / sum).template cast<Scalar>();
}

}  // namespace string_rope
