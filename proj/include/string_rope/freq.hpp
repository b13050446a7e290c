#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

namespace string_rope {

// Corpus length statistics: sequence length (tokens) -> number of sequences.
struct LengthHistogram {
  std::map<std::int64_t, std::int64_t> counts;

  // Adds `count` sequences of `length`; both must be >= 1.
  void add(std::int64_t length, std::int64_t count);
  std::int64_t total_tokens() const;
  std::int64_t total_sequences() const;
  friend bool operator==(const LengthHistogram&, const LengthHistogram&) = default;
};

// f[i] = number of training occurrences of relative position i, i in [0, L).
struct FreqCurve {
  std::int64_t train_len = 0;
  std::vector<std::int64_t> f;
};

enum class PackingMode { none, truncate_chunks, concat_chunks };

// CSV rows `length,count` with an optional header line. Duplicate lengths are
// summed. Throws ParseError carrying the 1-based line number.
LengthHistogram load_histogram(std::istream& source);

// none: lengths above L are clipped to L (remainder discarded).
// truncate_chunks: each sequence splits into floor(s/L) full chunks plus a
// remainder chunk. concat_chunks: all tokens are concatenated, then chunked.
LengthHistogram apply_packing(const LengthHistogram& h, std::int64_t train_len, PackingMode mode);

// f(i) = sum over sequences of max(|s| - i, 0). Lengths must not exceed L.
FreqCurve position_freq(const LengthHistogram& h, std::int64_t train_len);

// Share of the total frequency mass at positions >= from_pos.
double tail_share(const FreqCurve& curve, std::int64_t from_pos);

// CSV `position,frequency`, one row per position.
void export_curve(const FreqCurve& curve, std::ostream& sink);
FreqCurve load_curve(std::istream& source);

}  // namespace string_rope
