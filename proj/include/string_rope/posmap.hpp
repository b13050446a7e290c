#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "string_rope/numerics.hpp"

namespace string_rope {

using IndexMatrix = Matrix<std::int64_t>;

// Cell markers used by materialized stage matrices.
inline constexpr std::int64_t kDropped = -1;  // removed in the drop stage
inline constexpr std::int64_t kMasked = -2;   // above the diagonal (n > m)

// Shifted position map parameters: training length L, shift offset S and
// local window W, with 0 <= W < S < L. Distances m - n >= S are re-expressed
// as (m - n) - S + W; the shifted triangle has height N = L - S.
struct StringParams {
  std::int64_t seq_len = 0;
  std::int64_t shift = 0;
  std::int64_t window = 0;

  std::int64_t triangle() const { return seq_len - shift; }
  friend bool operator==(const StringParams&, const StringParams&) = default;
};

// Throws InvalidParams naming the first violated bound.
void check_params(const StringParams& p);

// Hard errors are thrown as InvalidParams; the returned strings are
// non-fatal tuning advisories (window below 32, shift outside [L/3, L/2]).
std::vector<std::string> validate_params(const StringParams& p);

std::int64_t standard_rel(Index m, Index n);
std::int64_t string_rel(Index m, Index n, const StringParams& p);
// (L - 1) - S + W, the id at (L - 1, 0). Near-band ids reach S - 1, which is
// larger when S > N + W.
// Largest id the shifted map produces: (L - 1) - S + W, reached at (L - 1, 0).
std::int64_t max_rel(const StringParams& p);

// Lazy (m, n) -> relative position id over causal pairs.
class RelPosMap {
public:
  enum class Kind { standard, shifted, table };

  static RelPosMap standard() { return RelPosMap(Standard{}); }
  static RelPosMap shifted(const StringParams& p);
  // Entries equal to kDropped or kMasked are undefined.
  static RelPosMap table(IndexMatrix t);

  Kind kind() const { return static_cast<Kind>(rep_.index()); }

  // Throws ContractViolation on n > m, out-of-range indices or undefined entries.
  std::int64_t operator()(Index m, Index n) const;

  // Whether every causal pair of a length-L sequence has an id.
  bool covers(Index seq_len) const;

  const StringParams* params() const { return std::get_if<StringParams>(&rep_); }

private:
  struct Standard {};
  using Rep = std::variant<Standard, StringParams, IndexMatrix>;
  explicit RelPosMap(Rep rep) : rep_(std::move(rep)) {}
  Rep rep_;
};

struct StageMatrices {
  IndexMatrix dropped;   // ids >= N replaced by kDropped
  IndexMatrix shifted;   // region m - n >= S holds (m - n) - S
  IndexMatrix final_;    // shifted region offset by W; equals string_rel pointwise
};

inline constexpr Index kDefaultMaterializeLimit = 4096;

// Throws MaterializationRefused when L exceeds limit.
StageMatrices build_stage_matrices(Index seq_len, Index shift, Index window,
                                   Index limit = kDefaultMaterializeLimit);

IndexMatrix materialize(const RelPosMap& map, Index seq_len, Index limit = kDefaultMaterializeLimit);

// Fixed-width, right-aligned columns separated by one space. Dropped cells
// print as a middle dot, masked cells as blanks; trailing blanks are trimmed.
std::string render_ascii(const IndexMatrix& m);

// One line per row; masked cells are empty fields and dropped cells are '-'.
std::string render_csv(const IndexMatrix& m);

}  // namespace string_rope
