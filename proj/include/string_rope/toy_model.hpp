#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "string_rope/attention.hpp"

namespace string_rope {

// Seeded tiny pre-norm transformer used to exercise the attention kernels
// inside a realistic layer stack.
struct ToyModelConfig {
  Index layers = 2;
  Index heads = 4;
  Index d_model = 64;
  Index vocab = 128;
  Index seq_len = 256;
  std::uint64_t seed = 0;
  double rope_base = 10000.0;

  Index head_dim() const { return heads > 0 ? d_model / heads : 0; }
  RopeConfig rope() const { return RopeConfig{head_dim(), rope_base}; }
  void validate() const;
};

struct StandardRope {};
struct ShiftedRope {
  StringParams params;
};
struct NaiveShiftedRope {
  StringParams params;
};

// Which attention kernel each head runs: plain rotary attention, the
// two-pass shifted decomposition, or the shifted-map reference oracle.
using AttentionStrategy = std::variant<StandardRope, ShiftedRope, NaiveShiftedRope>;

std::string strategy_name(const AttentionStrategy& s);

struct InitBound {
  std::string tensor;
  double bound;  // entries drawn from U(-bound, bound)
};

template <typename Scalar>
struct ToyLayer {
  Vector<Scalar> attn_norm;
  Matrix<Scalar> wq, wk, wv, wo;  // d_model x d_model
  Vector<Scalar> mlp_norm;
  Matrix<Scalar> w_up;    // d_model x 4 d_model
  Matrix<Scalar> w_down;  // 4 d_model x d_model
};

template <typename Scalar>
struct ToyModel {
  ToyModelConfig config;
  Matrix<Scalar> embedding;  // vocab x d_model
  std::vector<ToyLayer<Scalar>> layers;
  Vector<Scalar> final_norm;
  Matrix<Scalar> lm_head;  // d_model x vocab
  std::vector<InitBound> init_bounds;

  // FNV-1a over the raw bytes of every parameter, in declaration order.
  std::uint64_t checksum() const;
};

inline constexpr double kRmsNormEps = 1e-5;
inline constexpr Index kMlpExpansion = 4;

// Weights come from std::mt19937_64(seed); each draw u = (x >> 11) * 2^-53
// maps to (2u - 1) * bound. Projection bounds are 1/sqrt(fan_in), the
// embedding bound is 1, norm gains start at 1.
template <typename Scalar>
ToyModel<Scalar> init_model(const ToyModelConfig& cfg);

// Deterministic token ids in [0, vocab) for a config (seed-derived).
std::vector<Index> make_tokens(const ToyModelConfig& cfg);

template <typename Scalar>
Matrix<Scalar> forward(const ToyModel<Scalar>& model, const std::vector<Index>& tokens,
                       const AttentionStrategy& strategy);

// Single-head attention under a strategy (used by forward for every head).
template <typename Scalar>
Matrix<Scalar> attend(const AttentionInputs<Scalar>& in, const AttentionStrategy& strategy,
                      const KernelOptions& opt = {});

struct LogitsComparison {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  Index argmax_mismatch_rows = 0;
};

template <typename Scalar>
LogitsComparison compare_logits(const Matrix<Scalar>& a, const Matrix<Scalar>& b);

template <typename Scalar>
std::uint64_t matrix_checksum(const Matrix<Scalar>& m);

}  // namespace string_rope
