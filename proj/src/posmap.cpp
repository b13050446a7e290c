#include "string_rope/posmap.hpp"

#include <algorithm>
#include <sstream>

namespace string_rope {

void check_params(const StringParams& p) {
  if (p.seq_len < 2) throw InvalidParams("L must be >= 2 (got " + std::to_string(p.seq_len) + ")");
  if (p.window < 0) throw InvalidParams("W must be >= 0");
  if (p.shift >= p.seq_len) throw InvalidParams("S must be < L");
  if (p.window >= p.shift) throw InvalidParams("W must be < S");
}

std::vector<std::string> validate_params(const StringParams& p) {
  check_params(p);
  std::vector<std::string> advisories;
  if (p.window < 32) advisories.emplace_back("W < 32: local window below the suggested minimum");
  // Integer bounds: the recommended S = L/3 is ⌊L/3⌋ for lengths not divisible by 3.
  const std::int64_t lo = p.seq_len / 3;
  const std::int64_t hi = p.seq_len / 2;
  if (p.shift < lo || p.shift > hi)
    advisories.emplace_back("S outside [L/3, L/2] = [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
  return advisories;
}

std::int64_t standard_rel(Index m, Index n) {
  if (n < 0 || n > m)
    throw ContractViolation("standard_rel: requires m >= n >= 0 (m=" + std::to_string(m) +
                            ", n=" + std::to_string(n) + ")");
  return m - n;
}

std::int64_t string_rel(Index m, Index n, const StringParams& p) {
  if (n < 0 || n > m || m >= p.seq_len)
    throw ContractViolation("string_rel: (" + std::to_string(m) + ", " + std::to_string(n) +
                            ") is not a causal pair below L=" + std::to_string(p.seq_len));
  const std::int64_t d = m - n;
  return d >= p.shift ? d - p.shift + p.window : d;
}

std::int64_t max_rel(const StringParams& p) { return (p.seq_len - 1) - p.shift + p.window; }

RelPosMap RelPosMap::shifted(const StringParams& p) {
  check_params(p);
  return RelPosMap(p);
}

RelPosMap RelPosMap::table(IndexMatrix t) {
  if (t.rows() != t.cols()) throw ContractViolation("RelPosMap::table: matrix must be square");
  return RelPosMap(std::move(t));
}

std::int64_t RelPosMap::operator()(Index m, Index n) const {
  switch (kind()) {
    case Kind::standard:
      return standard_rel(m, n);
    case Kind::shifted:
      return string_rel(m, n, std::get<StringParams>(rep_));
    case Kind::table: {
      const auto& t = std::get<IndexMatrix>(rep_);
      if (n < 0 || n > m || m >= t.rows())
        throw ContractViolation("RelPosMap: pair outside table");
      const std::int64_t v = t(m, n);
      if (v < 0)
        throw ContractViolation("RelPosMap: undefined entry at (" + std::to_string(m) + ", " +
                                std::to_string(n) + ")");
      return v;
    }
  }
  throw ContractViolation("RelPosMap: unknown kind");
}

bool RelPosMap::covers(Index seq_len) const {
  switch (kind()) {
    case Kind::standard:
      return true;
    case Kind::shifted:
      return seq_len <= std::get<StringParams>(rep_).seq_len;
    case Kind::table: {
      const auto& t = std::get<IndexMatrix>(rep_);
      if (seq_len > t.rows()) return false;
      for (Index m = 0; m < seq_len; ++m)
        for (Index n = 0; n <= m; ++n)
          if (t(m, n) < 0) return false;
      return true;
    }
  }
  return false;
}

namespace {

void require_materializable(Index seq_len, Index limit) {
  if (seq_len > limit)
    throw MaterializationRefused("refusing to materialize L=" + std::to_string(seq_len) +
                                 " (limit " + std::to_string(limit) + ")");
}

IndexMatrix causal_distances(Index seq_len) {
  IndexMatrix p = IndexMatrix::Constant(seq_len, seq_len, kMasked);
  for (Index m = 0; m < seq_len; ++m)
    for (Index n = 0; n <= m; ++n) p(m, n) = m - n;
  return p;
}

}  // namespace

StageMatrices build_stage_matrices(Index seq_len, Index shift, Index window, Index limit) {
  const StringParams p{seq_len, shift, window};
  check_params(p);
  require_materializable(seq_len, limit);
  const Index height = p.triangle();

  StageMatrices out;
  out.dropped = causal_distances(seq_len);
  for (Index m = 0; m < seq_len; ++m)
    for (Index n = 0; n <= m; ++n)
      if (out.dropped(m, n) >= height) out.dropped(m, n) = kDropped;

  // Cells with m - n >= S take the value S places up the diagonal; the near
  // band keeps m - n, which restores ids in [N, S) when S > L/2.
  out.shifted = out.dropped;
  for (Index m = 0; m < seq_len; ++m)
    for (Index n = 0; n <= m; ++n) out.shifted(m, n) = m - n >= shift ? (m - n) - shift : m - n;

  out.final_ = out.shifted;
  for (Index m = 0; m < seq_len; ++m)
    for (Index n = 0; n <= m; ++n)
      if (m - n >= shift) out.final_(m, n) += window;
  return out;
}

IndexMatrix materialize(const RelPosMap& map, Index seq_len, Index limit) {
  require_materializable(seq_len, limit);
  IndexMatrix out = IndexMatrix::Constant(seq_len, seq_len, kMasked);
  for (Index m = 0; m < seq_len; ++m)
    for (Index n = 0; n <= m; ++n) out(m, n) = map(m, n);
  return out;
}

std::string render_ascii(const IndexMatrix& m) {
  std::int64_t widest = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) widest = std::max(widest, m(i, j));
  const std::size_t width = std::to_string(widest).size();

  std::ostringstream os;
  for (Index i = 0; i < m.rows(); ++i) {
    std::string line;
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line += ' ';
      const std::int64_t v = m(i, j);
      if (v == kMasked) {
        line.append(width, ' ');
      } else if (v == kDropped) {
        line.append(width - 1, ' ');
        line += "·";
      } else {
        const std::string s = std::to_string(v);
        line.append(width - s.size(), ' ');
        line += s;
      }
    }
    line.erase(line.find_last_not_of(' ') + 1);
    os << line << '\n';
  }
  return os.str();
}

std::string render_csv(const IndexMatrix& m) {
  std::ostringstream os;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ',';
      const std::int64_t v = m(i, j);
      if (v == kDropped)
        os << '-';
      else if (v != kMasked)
        os << v;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace string_rope
