#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "string_rope/numerics.hpp"

namespace string_rope {

// Rotary embedding over interleaved pairs (x[2j], x[2j+1]).
struct RopeConfig {
  Index head_dim = 64;
  double base = 10000.0;

  void validate() const;
};

// base^(-2j/d) for j in [0, d/2).
std::vector<double> inv_freqs(const RopeConfig& config);

// Per-position cos/sin tables, filled by rotation_angle.
class RotaryTable {
public:
  RotaryTable(const RopeConfig& config, std::int64_t first_pos, std::int64_t count);

  std::int64_t first_pos() const { return first_; }
  std::int64_t count() const { return cos_.rows(); }
  Index half_dim() const { return cos_.cols(); }
  bool contains(std::int64_t pos) const { return pos >= first_ && pos < first_ + count(); }

  double cos(std::int64_t pos, Index j) const { return cos_(pos - first_, j); }
  double sin(std::int64_t pos, Index j) const { return sin_(pos - first_, j); }

private:
  std::int64_t first_;
  Matrix<double> cos_;
  Matrix<double> sin_;
};

namespace detail {

// cos and sin of pos * freq, formed and evaluated in long double so the
// product keeps its low bits at positions near 1e6.
inline std::pair<double, double> rotation(std::int64_t pos, double freq) {
  const long double angle = static_cast<long double>(pos) * static_cast<long double>(freq);
  return {static_cast<double>(std::cos(angle)), static_cast<double>(std::sin(angle))};
}

template <typename Derived, typename CosSin>
Vector<typename Derived::Scalar> rotate_pairs(const Eigen::MatrixBase<Derived>& x, Index half,
                                              CosSin&& cos_sin) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(x.size());
  for (Index j = 0; j < half; ++j) {
    const auto [c, s] = cos_sin(j);
    const double x0 = static_cast<double>(x.coeff(2 * j));
    const double x1 = static_cast<double>(x.coeff(2 * j + 1));
    out[2 * j] = static_cast<Scalar>(x0 * c - x1 * s);
    out[2 * j + 1] = static_cast<Scalar>(x0 * s + x1 * c);
  }
  return out;
}

inline void require_head_dim(Index size, const RopeConfig& config, const char* what) {
  if (size != config.head_dim)
    throw ContractViolation(std::string(what) + ": vector length " + std::to_string(size) +
                            " != head_dim " + std::to_string(config.head_dim));
}

}  // namespace detail

template <typename Derived>
Vector<typename Derived::Scalar> apply_rope(const Eigen::MatrixBase<Derived>& x, std::int64_t pos,
                                            const RopeConfig& config) {
  config.validate();
  detail::require_head_dim(x.size(), config, "apply_rope");
  const std::vector<double> freqs = inv_freqs(config);
  return detail::rotate_pairs(x, config.head_dim / 2,
                              [&](Index j) { return detail::rotation(pos, freqs[static_cast<std::size_t>(j)]); });
}

template <typename Derived>
Vector<typename Derived::Scalar> apply_rope(const Eigen::MatrixBase<Derived>& x, std::int64_t pos,
                                            const RotaryTable& table) {
  if (!table.contains(pos)) throw ContractViolation("apply_rope: position outside rotary table");
  if (x.size() != 2 * table.half_dim()) throw ContractViolation("apply_rope: length mismatch");
  return detail::rotate_pairs(x, table.half_dim(), [&](Index j) {
    return std::pair{table.cos(pos, j), table.sin(pos, j)};
  });
}

// <R(rel) q, k>, which equals <R(a) q, R(b) k> whenever a - b = rel.
template <typename DerivedQ, typename DerivedK>
double rel_score(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedK>& k,
                 std::int64_t rel, const RopeConfig& config) {
  detail::require_head_dim(k.size(), config, "rel_score");
  return dot_acc(apply_rope(q, rel, config), k);
}

// Rotates every row i of x by position first_pos + i.
template <typename Scalar>
Matrix<Scalar> rotate_rows(const Matrix<Scalar>& x, std::int64_t first_pos, const RotaryTable& table) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    out.row(i) = apply_rope(x.row(i).transpose(), first_pos + i, table).transpose();
  return out;
}

}  // namespace string_rope
