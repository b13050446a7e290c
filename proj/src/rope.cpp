#include "string_rope/rope.hpp"

#include <cmath>

namespace string_rope {

void RopeConfig::validate() const {
  if (head_dim < 2 || head_dim % 2 != 0)
    throw ContractViolation("RopeConfig: head_dim must be even and >= 2, got " +
                            std::to_string(head_dim));
  if (!(base > 1.0) || !std::isfinite(base))
    throw ContractViolation("RopeConfig: base must be a finite value > 1");
}

std::vector<double> inv_freqs(const RopeConfig& config) {
  config.validate();
  const Index half = config.head_dim / 2;
  std::vector<double> freqs(static_cast<std::size_t>(half));
  const double d = static_cast<double>(config.head_dim);
  for (Index j = 0; j < half; ++j)
    freqs[static_cast<std::size_t>(j)] = std::pow(config.base, -2.0 * static_cast<double>(j) / d);
  return freqs;
}

RotaryTable::RotaryTable(const RopeConfig& config, std::int64_t first_pos, std::int64_t count)
    : first_(first_pos) {
  if (count < 0) throw ContractViolation("RotaryTable: negative count");
  const std::vector<double> freqs = inv_freqs(config);
  const Index half = config.head_dim / 2;
  cos_.resize(count, half);
  sin_.resize(count, half);
  for (std::int64_t p = 0; p < count; ++p) {
    for (Index j = 0; j < half; ++j) {
      const auto [c, s] = detail::rotation(first_pos + p, freqs[static_cast<std::size_t>(j)]);
      cos_(p, j) = c;
      sin_(p, j) = s;
    }
  }
}

}  // namespace string_rope
