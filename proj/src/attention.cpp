#include "string_rope/attention.hpp"

namespace string_rope {

std::uint64_t score_count(Index seq_len, Index shift) {
  if (seq_len < 1 || shift < 1 || shift > seq_len)
    throw ContractViolation("score_count: requires 1 <= S <= L");
  const auto len = static_cast<std::uint64_t>(seq_len);
  const auto s = static_cast<std::uint64_t>(shift);
  const std::uint64_t band = s * (s + 1) / 2 + (len - s) * s;
  const std::uint64_t height = len - s;
  return band + height * (height + 1) / 2;
}

}  // namespace string_rope
