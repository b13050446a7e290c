#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>

#include "string_rope/numerics.hpp"
#include "string_rope/posmap.hpp"
#include "string_rope/rope.hpp"

namespace string_rope {

template <typename Scalar>
struct AttentionInputs {
  Matrix<Scalar> q;  // L x d, unrotated
  Matrix<Scalar> k;
  Matrix<Scalar> v;
  RopeConfig rope;
  std::optional<double> scale;  // defaults to 1/sqrt(d)

  Index seq_len() const { return q.rows(); }
  Index head_dim() const { return q.cols(); }
  double effective_scale() const {
    return scale.value_or(1.0 / std::sqrt(static_cast<double>(head_dim())));
  }

  void validate() const {
    rope.validate();
    if (k.rows() != q.rows() || v.rows() != q.rows())
      throw ContractViolation("AttentionInputs: q, k, v must share L");
    if (k.cols() != q.cols() || v.cols() != q.cols())
      throw ContractViolation("AttentionInputs: q, k, v must share d");
    if (q.cols() != rope.head_dim)
      throw ContractViolation("AttentionInputs: d != rope.head_dim");
    if (q.rows() < 1) throw ContractViolation("AttentionInputs: empty sequence");
  }
};

// Normalized output rows for one pass over a contiguous block of queries,
// plus the log-sum-exp of that pass's scores per row. A row that saw no
// keys has lse = -inf and a zero output row.
template <typename Scalar>
struct PartialAttention {
  Matrix<Scalar> out;
  Eigen::VectorXd lse;
  Index row_offset = 0;

  Index rows() const { return out.rows(); }
  bool has_keys(Index r) const { return std::isfinite(lse[r]); }
};

// Score-pair and auxiliary-memory accounting for one kernel invocation.
struct KernelStats {
  std::uint64_t evaluated_pairs = 0;
  std::uint64_t tiles_visited = 0;
  std::size_t current_aux_bytes = 0;
  std::size_t peak_aux_bytes = 0;

  void acquire(std::size_t bytes) {
    current_aux_bytes += bytes;
    peak_aux_bytes = std::max(peak_aux_bytes, current_aux_bytes);
  }
  void release(std::size_t bytes) { current_aux_bytes -= bytes; }
};

// Called once per evaluated (query, key) pair with the realized relative
// position and the scaled score.
using ScoreObserver = std::function<void(Index m, Index n, std::int64_t rel, double score)>;

struct KernelOptions {
  Index tile_rows = 128;
  Index tile_cols = 128;
  KernelStats* stats = nullptr;
  ScoreObserver observer;
};

// Exact number of scores the decomposed kernel evaluates:
// sum_m min(m + 1, S) + N (N + 1) / 2 with N = L - S.
std::uint64_t score_count(Index seq_len, Index shift);
inline std::uint64_t score_count(const StringParams& p) { return score_count(p.seq_len, p.shift); }

namespace detail {

// Owns an auxiliary matrix and reports its footprint to KernelStats.
template <typename T>
class AuxBuffer {
public:
  AuxBuffer(Index rows, Index cols, KernelStats* stats) : data_(rows, cols), stats_(stats) {
    if (stats_) stats_->acquire(bytes());
  }
  AuxBuffer(Matrix<T> m, KernelStats* stats) : data_(std::move(m)), stats_(stats) {
    if (stats_) stats_->acquire(bytes());
  }
  AuxBuffer(const AuxBuffer&) = delete;
  AuxBuffer& operator=(const AuxBuffer&) = delete;
  ~AuxBuffer() {
    if (stats_) stats_->release(bytes());
  }

  Matrix<T>& operator*() { return data_; }
  const Matrix<T>& operator*() const { return data_; }
  Matrix<T>* operator->() { return &data_; }
  const Matrix<T>* operator->() const { return &data_; }

private:
  std::size_t bytes() const { return static_cast<std::size_t>(data_.size()) * sizeof(T); }
  Matrix<T> data_;
  KernelStats* stats_;
};

// Flash-style pass over query rows [row_begin, row_end) of q_rot (which is
// indexed from row_begin). Row m attends keys [first_key(m), last_key(m)];
// both bounds must be non-decreasing in m. Keys are processed in tiles with
// an online softmax; nothing of size rows x keys is ever formed.
template <typename Scalar, typename FirstKey, typename LastKey>
PartialAttention<Scalar> tiled_pass(const Matrix<Scalar>& q_rot, std::int64_t q_first_pos,
                                    const Matrix<Scalar>& k_rot, const Matrix<Scalar>& v,
                                    Index row_begin, Index row_end, FirstKey first_key,
                                    LastKey last_key, double scale, const KernelOptions& opt) {
  const Index d = v.cols();
  const Index rows = row_end - row_begin;
  const Index br = std::max<Index>(1, opt.tile_rows);
  const Index bc = std::max<Index>(1, opt.tile_cols);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  PartialAttention<Scalar> part;
  part.row_offset = row_begin;
  part.out = Matrix<Scalar>::Zero(rows, d);
  part.lse = Eigen::VectorXd::Constant(rows, kNegInf);

  AuxBuffer<double> tile(br, bc, opt.stats);
  AuxBuffer<double> acc(br, d, opt.stats);
  AuxBuffer<double> run(br, 2, opt.stats);  // running max, running sum

  for (Index r0 = row_begin; r0 < row_end; r0 += br) {
    const Index r1 = std::min(row_end, r0 + br);
    acc->setZero();
    run->col(0).setConstant(kNegInf);
    run->col(1).setZero();

    const Index key_lo = first_key(r0);
    const Index key_hi = last_key(r1 - 1);
    for (Index c0 = key_lo; c0 <= key_hi; c0 += bc) {
      const Index c1 = std::min(key_hi + 1, c0 + bc);
      bool any = false;
      for (Index m = r0; m < r1; ++m) {
        const Index i = m - r0;
        const Index lo = std::max(c0, first_key(m));
        const Index hi = std::min(c1 - 1, last_key(m));
        tile->row(i).setConstant(kNegInf);
        for (Index n = lo; n <= hi; ++n) {
          const double s = scale * dot_acc(q_rot.row(m - row_begin), k_rot.row(n));
          (*tile)(i, n - c0) = s;
          if (opt.observer) opt.observer(m, n, (q_first_pos + (m - row_begin)) - n, s);
        }
        if (hi >= lo) {
          any = true;
          if (opt.stats) opt.stats->evaluated_pairs += static_cast<std::uint64_t>(hi - lo + 1);
        }
      }
      if (!any) continue;
      if (opt.stats) ++opt.stats->tiles_visited;

      for (Index m = r0; m < r1; ++m) {
        const Index i = m - r0;
        const Index lo = std::max(c0, first_key(m));
        const Index hi = std::min(c1 - 1, last_key(m));
        if (hi < lo) continue;
        double tile_max = kNegInf;
        for (Index n = lo; n <= hi; ++n) tile_max = std::max(tile_max, (*tile)(i, n - c0));
        const double new_max = std::max((*run)(i, 0), tile_max);
        const double correction = std::exp((*run)(i, 0) - new_max);
        (*run)(i, 1) *= correction;
        acc->row(i) *= correction;
        for (Index n = lo; n <= hi; ++n) {
          const double p = std::exp((*tile)(i, n - c0) - new_max);
          (*run)(i, 1) += p;
          for (Index j = 0; j < d; ++j) (*acc)(i, j) += p * static_cast<double>(v(n, j));
        }
        (*run)(i, 0) = new_max;
      }
    }

    for (Index m = r0; m < r1; ++m) {
      const Index i = m - r0;
      const Index r = m - row_begin;
      if ((*run)(i, 1) == 0.0) continue;
      part.out.row(r) = (acc->row(i) / (*run)(i, 1)).template cast<Scalar>();
      part.lse[r] = (*run)(i, 0) + std::log((*run)(i, 1));
    }
  }
  return part;
}

template <typename Scalar>
PartialAttention<Scalar> sliding_window(const Matrix<Scalar>& q_rot, const Matrix<Scalar>& k_rot,
                                        const Matrix<Scalar>& v, Index shift, double scale,
                                        const KernelOptions& opt) {
  const Index len = v.rows();
  return tiled_pass(
      q_rot, 0, k_rot, v, 0, len, [shift](Index m) { return std::max<Index>(0, m - shift + 1); },
      [](Index m) { return m; }, scale, opt);
}

template <typename Scalar>
PartialAttention<Scalar> shifted_block(const Matrix<Scalar>& q_shifted_rot, const Matrix<Scalar>& k_rot,
                                       const Matrix<Scalar>& v, const StringParams& p, double scale,
                                       const KernelOptions& opt) {
  // Queries m in [S, L) carry position id m - S + W; keys keep id n.
  const Index shift = p.shift;
  return tiled_pass(
      q_shifted_rot, p.window, k_rot, v, shift, p.seq_len, [](Index) { return Index{0}; },
      [shift](Index m) { return m - shift; }, scale, opt);
}

inline void require_shift_in_range(Index shift, Index len) {
  if (shift < 1 || shift > len)
    throw ContractViolation("sliding window size S=" + std::to_string(shift) +
                            " outside [1, L=" + std::to_string(len) + "]");
}

inline void require_params_for(const StringParams& p, Index len) {
  check_params(p);
  if (p.seq_len != len)
    throw ContractViolation("StringParams L=" + std::to_string(p.seq_len) +
                            " does not match input length " + std::to_string(len));
  if (p.triangle() < 1) throw ContractViolation("shifted triangle height N must be >= 1");
}

}  // namespace detail

// Query m attends keys [max(0, m - S + 1), m] at standard positions.
template <typename Scalar>
PartialAttention<Scalar> sliding_window_pass(const AttentionInputs<Scalar>& in, Index shift,
                                             const KernelOptions& opt = {}) {
  in.validate();
  const Index len = in.seq_len();
  detail::require_shift_in_range(shift, len);
  const RotaryTable table(in.rope, 0, len);
  detail::AuxBuffer<Scalar> q_rot(rotate_rows(in.q, 0, table), opt.stats);
  detail::AuxBuffer<Scalar> k_rot(rotate_rows(in.k, 0, table), opt.stats);
  return detail::sliding_window(*q_rot, *k_rot, in.v, shift, in.effective_scale(), opt);
}

// Queries m in [S, L) against keys [0, m - S], query ids shifted to
// m - S + W, so the realized relative position is (m - n) - S + W. Keys are
// rotated at their standard positions.
template <typename Scalar>
PartialAttention<Scalar> shifted_block_pass(const AttentionInputs<Scalar>& in, const StringParams& p,
                                            const KernelOptions& opt = {}) {
  in.validate();
  detail::require_params_for(p, in.seq_len());
  const RotaryTable table(in.rope, 0, p.seq_len);
  detail::AuxBuffer<Scalar> q_rot(
      rotate_rows<Scalar>(in.q.bottomRows(p.triangle()), p.window, table), opt.stats);
  detail::AuxBuffer<Scalar> k_rot(rotate_rows<Scalar>(in.k.topRows(p.triangle()), 0, table),
                                  opt.stats);
  return detail::shifted_block(*q_rot, *k_rot, in.v, p, in.effective_scale(), opt);
}

// Rows below S come from diag unchanged; later rows are the lse-weighted
// combination of both partials, which equals a softmax over the union of the
// two (disjoint) key sets.
template <typename Scalar>
Matrix<Scalar> merge_partials(const PartialAttention<Scalar>& diag,
                              const PartialAttention<Scalar>& shifted, Index shift) {
  const Index len = diag.rows();
  if (diag.row_offset != 0) throw ContractViolation("merge_partials: diag must start at row 0");
  if (shift < 0 || shift > len) throw ContractViolation("merge_partials: S outside [0, L]");
  if (shifted.row_offset != shift || shifted.rows() != len - shift)
    throw ContractViolation("merge_partials: shifted partial must cover rows [S, L)");
  if (shifted.out.cols() != diag.out.cols())
    throw ContractViolation("merge_partials: head dims differ");

  Matrix<Scalar> out = diag.out;
  for (Index r = 0; r < shifted.rows(); ++r) {
    const Index m = shift + r;
    if (!shifted.has_keys(r)) continue;
    if (!diag.has_keys(m)) {
      out.row(m) = shifted.out.row(r);
      continue;
    }
    const double lse_d = diag.lse[m];
    const double lse_s = shifted.lse[r];
    const double hi = std::max(lse_d, lse_s);
    const double total = hi + std::log(std::exp(lse_d - hi) + std::exp(lse_s - hi));
    const double w_diag = std::exp(lse_d - total);
    const double w_shift = std::exp(lse_s - total);
    out.row(m) = (w_diag * diag.out.row(m).template cast<double>() +
                  w_shift * shifted.out.row(r).template cast<double>())
                     .template cast<Scalar>();
  }
  require_finite(out, "merge_partials");
  return out;
}

template <typename Scalar>
Matrix<Scalar> string_attention(const AttentionInputs<Scalar>& in, const StringParams& p,
                                const KernelOptions& opt = {}) {
  in.validate();
  detail::require_params_for(p, in.seq_len());
  const Index len = in.seq_len();
  const Index height = p.triangle();
  const double scale = in.effective_scale();

  const RotaryTable table(in.rope, 0, len);
  if (opt.stats) opt.stats->acquire(2 * sizeof(double) * static_cast<std::size_t>(len * table.half_dim()));
  // Keys are rotated once at standard positions and shared by both passes.
  detail::AuxBuffer<Scalar> k_rot(rotate_rows(in.k, 0, table), opt.stats);

  PartialAttention<Scalar> diag;
  {
    detail::AuxBuffer<Scalar> q_rot(rotate_rows(in.q, 0, table), opt.stats);
    diag = detail::sliding_window(*q_rot, *k_rot, in.v, p.shift, scale, opt);
  }
  if (opt.stats) opt.stats->acquire(static_cast<std::size_t>(diag.out.size()) * sizeof(Scalar) +
                                    static_cast<std::size_t>(diag.lse.size()) * sizeof(double));

  PartialAttention<Scalar> shifted;
  {
    detail::AuxBuffer<Scalar> q_rot(rotate_rows<Scalar>(in.q.bottomRows(height), p.window, table),
                                    opt.stats);
    shifted = detail::shifted_block(*q_rot, *k_rot, in.v, p, scale, opt);
  }
  if (opt.stats) opt.stats->acquire(static_cast<std::size_t>(shifted.out.size()) * sizeof(Scalar) +
                                    static_cast<std::size_t>(shifted.lse.size()) * sizeof(double));

  Matrix<Scalar> out = merge_partials(diag, shifted, p.shift);
  if (opt.stats) {
    opt.stats->release(static_cast<std::size_t>(diag.out.size() + shifted.out.size()) * sizeof(Scalar) +
                       static_cast<std::size_t>(diag.lse.size() + shifted.lse.size()) * sizeof(double));
    opt.stats->release(2 * sizeof(double) * static_cast<std::size_t>(len * table.half_dim()));
  }
  return out;
}

// Reference attention: every causal pair scored as scale * rel_score(q_m,
// k_n, map(m, n)), one full softmax per row.
template <typename Scalar>
Matrix<Scalar> naive_relpos_attention(const AttentionInputs<Scalar>& in, const RelPosMap& map,
                                      KernelStats* stats = nullptr) {
  in.validate();
  const Index len = in.seq_len();
  const Index d = in.head_dim();
  const double scale = in.effective_scale();

  std::int64_t widest = 0;
  for (Index m = 0; m < len; ++m)
    for (Index n = 0; n <= m; ++n) widest = std::max(widest, map(m, n));
  const RotaryTable table(in.rope, 0, widest + 1);

  Matrix<Scalar> out(len, d);
  Eigen::VectorXd scores(len);
  Vector<Scalar> q_rel(d);
  const std::size_t aux_bytes = 2 * sizeof(double) * static_cast<std::size_t>(table.count() * table.half_dim()) +
                                sizeof(double) * static_cast<std::size_t>(len + d) +
                                sizeof(Scalar) * static_cast<std::size_t>(d);
  if (stats) stats->acquire(aux_bytes);
  for (Index m = 0; m < len; ++m) {
    for (Index n = 0; n <= m; ++n) {
      q_rel = apply_rope(in.q.row(m).transpose(), map(m, n), table);
      scores[n] = scale * dot_acc(q_rel, in.k.row(n));
    }
    if (stats) stats->evaluated_pairs += static_cast<std::uint64_t>(m + 1);
    const double mx = scores.head(m + 1).maxCoeff();
    double sum = 0.0;
    Eigen::VectorXd row = Eigen::VectorXd::Zero(d);
    for (Index n = 0; n <= m; ++n) {
      const double p = std::exp(scores[n] - mx);
      sum += p;
      row += p * in.v.row(n).transpose().template cast<double>();
    }
    out.row(m) = (row / sum).transpose().template cast<Scalar>();
  }
  if (stats) stats->release(aux_bytes);
  require_finite(out, "naive_relpos_attention");
  return out;
}

}  // namespace string_rope
