#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "string_rope/attention.hpp"

namespace string_rope {

// S = floor(L * numerator / denominator); W fixed across lengths.
struct ShiftTemplate {
  std::int64_t numerator = 1;
  std::int64_t denominator = 3;
  std::int64_t window = 128;

  StringParams for_length(std::int64_t seq_len) const;
};

// Accepts "p/q" or a decimal fraction such as "0.25"; throws InvalidParams.
ShiftTemplate parse_shift_fraction(const std::string& text, std::int64_t window);

struct BenchRecord {
  Index seq_len = 0;
  std::string strategy;  // "naive" or "string"
  double median_ms = 0.0;
  std::uint64_t score_pairs = 0;
  std::size_t peak_aux_bytes = 0;
};

struct BenchReport {
  std::vector<BenchRecord> records;

  // CSV `L,strategy,median_ms,score_pairs,peak_aux_bytes`.
  void write_csv(std::ostream& sink) const;
};

// Median wall time of the naive shifted-map oracle and the decomposed
// kernel for each length, with score-pair counts and auxiliary memory.
// Timings are reported only; nothing about them is asserted.
BenchReport bench_attention(const std::vector<Index>& lengths, const ShiftTemplate& shift,
                            Index head_dim, int repeats, std::uint64_t seed = 0);

// q, k, v filled from U(-1, 1) with std::mt19937_64(seed).
template <typename Scalar>
AttentionInputs<Scalar> random_inputs(Index seq_len, Index head_dim, std::uint64_t seed,
                                      double rope_base = 10000.0);

}  // namespace string_rope
