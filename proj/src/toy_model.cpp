#include "string_rope/toy_model.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace string_rope {

void ToyModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || vocab < 1 || seq_len < 1)
    throw ContractViolation("ToyModelConfig: all dimensions must be >= 1");
  if (d_model % heads != 0)
    throw ContractViolation("ToyModelConfig: d_model " + std::to_string(d_model) +
                            " not divisible by heads " + std::to_string(heads));
  if (head_dim() % 2 != 0)
    throw ContractViolation("ToyModelConfig: head_dim " + std::to_string(head_dim()) + " is odd");
  rope().validate();
}

std::string strategy_name(const AttentionStrategy& s) {
  switch (s.index()) {
    case 0:
      return "rope";
    case 1:
      return "string";
    default:
      return "naive-string";
  }
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

template <typename Derived>
void fnv_mix(std::uint64_t& h, const Eigen::DenseBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const Scalar v = m(i, j);
      unsigned char bytes[sizeof(Scalar)];
      std::memcpy(bytes, &v, sizeof(Scalar));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= kFnvPrime;
      }
    }
}

class UniformSource {
public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

  double next(double bound) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * bound;
  }

  template <typename Scalar>
  Matrix<Scalar> matrix(Index rows, Index cols, double bound) {
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(next(bound));
    return m;
  }

private:
  std::mt19937_64 engine_;
};

template <typename Scalar>
Matrix<Scalar> rms_norm(const Matrix<Scalar>& x, const Vector<Scalar>& gain) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double ms = 0.0;
    for (Index j = 0; j < x.cols(); ++j) ms += static_cast<double>(x(i, j)) * static_cast<double>(x(i, j));
    const double inv = 1.0 / std::sqrt(ms / static_cast<double>(x.cols()) + kRmsNormEps);
    for (Index j = 0; j < x.cols(); ++j)
      out(i, j) = static_cast<Scalar>(static_cast<double>(x(i, j)) * inv * static_cast<double>(gain[j]));
  }
  return out;
}

template <typename Scalar>
void silu_inplace(Matrix<Scalar>& x) {
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      const double v = static_cast<double>(x(i, j));
      x(i, j) = static_cast<Scalar>(v / (1.0 + std::exp(-v)));
    }
}

}  // namespace

template <typename Scalar>
std::uint64_t ToyModel<Scalar>::checksum() const {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, embedding);
  for (const auto& layer : layers) {
    fnv_mix(h, layer.attn_norm);
    fnv_mix(h, layer.wq);
    fnv_mix(h, layer.wk);
    fnv_mix(h, layer.wv);
    fnv_mix(h, layer.wo);
    fnv_mix(h, layer.mlp_norm);
    fnv_mix(h, layer.w_up);
    fnv_mix(h, layer.w_down);
  }
  fnv_mix(h, final_norm);
  fnv_mix(h, lm_head);
  return h;
}

template <typename Scalar>
std::uint64_t matrix_checksum(const Matrix<Scalar>& m) {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, m);
  return h;
}

template <typename Scalar>
ToyModel<Scalar> init_model(const ToyModelConfig& cfg) {
  cfg.validate();
  const Index d = cfg.d_model;
  const Index hidden = kMlpExpansion * d;
  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(d));
  const double down_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  constexpr double kEmbeddingBound = 1.0;

  UniformSource rng(cfg.seed);
  ToyModel<Scalar> model;
  model.config = cfg;
  model.embedding = rng.matrix<Scalar>(cfg.vocab, d, kEmbeddingBound);
  model.init_bounds.push_back({"embedding", kEmbeddingBound});
  for (Index l = 0; l < cfg.layers; ++l) {
    ToyLayer<Scalar> layer;
    layer.attn_norm = Vector<Scalar>::Ones(d);
    layer.wq = rng.matrix<Scalar>(d, d, proj_bound);
    layer.wk = rng.matrix<Scalar>(d, d, proj_bound);
    layer.wv = rng.matrix<Scalar>(d, d, proj_bound);
    layer.wo = rng.matrix<Scalar>(d, d, proj_bound);
    layer.mlp_norm = Vector<Scalar>::Ones(d);
    layer.w_up = rng.matrix<Scalar>(d, hidden, proj_bound);
    layer.w_down = rng.matrix<Scalar>(hidden, d, down_bound);
    model.layers.push_back(std::move(layer));
  }
  model.init_bounds.push_back({"wq,wk,wv,wo,w_up", proj_bound});
  model.init_bounds.push_back({"w_down", down_bound});
  model.final_norm = Vector<Scalar>::Ones(d);
  model.lm_head = rng.matrix<Scalar>(d, cfg.vocab, proj_bound);
  model.init_bounds.push_back({"lm_head", proj_bound});
  return model;
}

std::vector<Index> make_tokens(const ToyModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 engine(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Index> tokens(static_cast<std::size_t>(cfg.seq_len));
  for (auto& t : tokens) t = static_cast<Index>(engine() % static_cast<std::uint64_t>(cfg.vocab));
  return tokens;
}

template <typename Scalar>
Matrix<Scalar> attend(const AttentionInputs<Scalar>& in, const AttentionStrategy& strategy,
                      const KernelOptions& opt) {
  return std::visit(
      [&](const auto& s) -> Matrix<Scalar> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, StandardRope>) {
          return sliding_window_pass(in, in.seq_len(), opt).out;
        } else if constexpr (std::is_same_v<S, ShiftedRope>) {
          return string_attention(in, s.params, opt);
        } else {
          return naive_relpos_attention(in, RelPosMap::shifted(s.params), opt.stats);
        }
      },
      strategy);
}

template <typename Scalar>
Matrix<Scalar> forward(const ToyModel<Scalar>& model, const std::vector<Index>& tokens,
                       const AttentionStrategy& strategy) {
  const ToyModelConfig& cfg = model.config;
  if (static_cast<Index>(tokens.size()) != cfg.seq_len)
    throw ContractViolation("forward: expected " + std::to_string(cfg.seq_len) + " tokens, got " +
                            std::to_string(tokens.size()));
  const Index len = cfg.seq_len;
  const Index d = cfg.d_model;
  const Index hd = cfg.head_dim();

  Matrix<Scalar> x(len, d);
  for (Index i = 0; i < len; ++i) {
    const Index t = tokens[static_cast<std::size_t>(i)];
    if (t < 0 || t >= cfg.vocab)
      throw ContractViolation("forward: token id " + std::to_string(t) + " outside vocab");
    x.row(i) = model.embedding.row(t);
  }

  for (const auto& layer : model.layers) {
    const Matrix<Scalar> h = rms_norm(x, layer.attn_norm);
    const Matrix<Scalar> q = matmul(h, layer.wq);
    const Matrix<Scalar> k = matmul(h, layer.wk);
    const Matrix<Scalar> v = matmul(h, layer.wv);
    Matrix<Scalar> heads(len, d);
    for (Index head = 0; head < cfg.heads; ++head) {
      AttentionInputs<Scalar> in{q.middleCols(head * hd, hd), k.middleCols(head * hd, hd),
                                 v.middleCols(head * hd, hd), cfg.rope(), std::nullopt};
      heads.middleCols(head * hd, hd) = attend(in, strategy);
    }
    x += matmul(heads, layer.wo);

    Matrix<Scalar> up = matmul(rms_norm(x, layer.mlp_norm), layer.w_up);
    silu_inplace(up);
    x += matmul(up, layer.w_down);
  }
  Matrix<Scalar> logits = matmul(rms_norm(x, model.final_norm), model.lm_head);
  require_finite(logits, "forward");
  return logits;
}

template <typename Scalar>
LogitsComparison compare_logits(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractViolation("compare_logits: shape mismatch");
  LogitsComparison c;
  if (a.size() == 0) return c;
  double sum = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    Index arg_a = 0;
    Index arg_b = 0;
    for (Index j = 0; j < a.cols(); ++j) {
      const double diff = std::abs(static_cast<double>(a(i, j)) - static_cast<double>(b(i, j)));
      c.max_abs = std::max(c.max_abs, diff);
      sum += diff;
      if (a(i, j) > a(i, arg_a)) arg_a = j;
      if (b(i, j) > b(i, arg_b)) arg_b = j;
    }
    if (arg_a != arg_b) ++c.argmax_mismatch_rows;
  }
  c.mean_abs = sum / static_cast<double>(a.size());
  return c;
}

#define STRING_ROPE_INSTANTIATE(Scalar)                                                              \
  template struct ToyModel<Scalar>;                                                                 \
  template ToyModel<Scalar> init_model<Scalar>(const ToyModelConfig&);                              \
  template Matrix<Scalar> forward<Scalar>(const ToyModel<Scalar>&, const std::vector<Index>&,       \
                                          const AttentionStrategy&);                                \
  template Matrix<Scalar> attend<Scalar>(const AttentionInputs<Scalar>&, const AttentionStrategy&,  \
                                         const KernelOptions&);                                     \
  template LogitsComparison compare_logits<Scalar>(const Matrix<Scalar>&, const Matrix<Scalar>&);   \
  template std::uint64_t matrix_checksum<Scalar>(const Matrix<Scalar>&);

STRING_ROPE_INSTANTIATE(float)
STRING_ROPE_INSTANTIATE(double)

#undef STRING_ROPE_INSTANTIATE

}  // namespace string_rope
