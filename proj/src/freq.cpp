#include "string_rope/freq.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "string_rope/errors.hpp"

namespace string_rope {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b, const char* what) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw ContractViolation(std::string(what) + ": 64-bit overflow");
  return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b, const char* what) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw ContractViolation(std::string(what) + ": 64-bit overflow");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Splits "a,b" into two integers; false when the line is not exactly that.
bool parse_pair(std::string_view line, std::int64_t& a, std::int64_t& b) {
  const auto comma = line.find(',');
  if (comma == std::string_view::npos) return false;
  return parse_int(line.substr(0, comma), a) && parse_int(line.substr(comma + 1), b);
}

bool looks_like_header(std::string_view line) {
  const auto first = line.find_first_not_of(" \t");
  return first != std::string_view::npos && !(line[first] >= '0' && line[first] <= '9') &&
         line[first] != '-' && line[first] != '+';
}

}  // namespace

void LengthHistogram::add(std::int64_t length, std::int64_t count) {
  if (length < 1) throw ContractViolation("LengthHistogram: length must be >= 1");
  if (count < 1) throw ContractViolation("LengthHistogram: count must be >= 1");
  auto& slot = counts[length];
  slot = checked_add(slot, count, "LengthHistogram");
}

std::int64_t LengthHistogram::total_tokens() const {
  std::int64_t total = 0;
  for (const auto& [len, c] : counts) total = checked_add(total, checked_mul(len, c, "total_tokens"), "total_tokens");
  return total;
}

std::int64_t LengthHistogram::total_sequences() const {
  std::int64_t total = 0;
  for (const auto& [len, c] : counts) total = checked_add(total, c, "total_sequences");
  return total;
}

LengthHistogram load_histogram(std::istream& source) {
  LengthHistogram h;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(source, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const bool first = !seen_content;
    seen_content = true;
    std::int64_t length = 0;
    std::int64_t count = 0;
    if (!parse_pair(line, length, count)) {
      if (first && looks_like_header(line)) continue;
      throw ParseError(line_no, "expected `length,count`, got `" + std::string(line) + "`");
    }
    if (length < 1) throw ParseError(line_no, "length must be positive");
    if (count < 1) throw ParseError(line_no, "count must be positive");
    try {
      h.add(length, count);
    } catch (const ContractViolation& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (h.counts.empty()) throw ParseError(0, "no records");
  (void)h.total_tokens();
  return h;
}

LengthHistogram apply_packing(const LengthHistogram& h, std::int64_t train_len, PackingMode mode) {
  if (train_len < 1) throw ContractViolation("apply_packing: L must be >= 1");
  LengthHistogram out;
  switch (mode) {
    case PackingMode::none:
      for (const auto& [len, c] : h.counts) out.add(std::min(len, train_len), c);
      break;
    case PackingMode::truncate_chunks:
      for (const auto& [len, c] : h.counts) {
        const std::int64_t full = len / train_len;
        const std::int64_t rest = len % train_len;
        if (full > 0) out.add(train_len, checked_mul(full, c, "apply_packing"));
        if (rest > 0) out.add(rest, c);
      }
      break;
    case PackingMode::concat_chunks: {
      const std::int64_t total = h.total_tokens();
      if (total / train_len > 0) out.add(train_len, total / train_len);
      if (total % train_len > 0) out.add(total % train_len, 1);
      break;
    }
  }
  return out;
}

FreqCurve position_freq(const LengthHistogram& h, std::int64_t train_len) {
  if (train_len < 1) throw ContractViolation("position_freq: L must be >= 1");
  for (const auto& [len, c] : h.counts)
    if (len > train_len)
      throw ContractViolation("position_freq: sequence length " + std::to_string(len) +
                              " exceeds L=" + std::to_string(train_len) + "; pack first");

  // f[i] - f[i+1] is the number of sequences longer than i.
  FreqCurve curve{train_len, std::vector<std::int64_t>(static_cast<std::size_t>(train_len), 0)};
  std::int64_t longer = 0;
  std::int64_t next = 0;
  auto it = h.counts.rbegin();
  for (std::int64_t i = train_len - 1; i >= 0; --i) {
    for (; it != h.counts.rend() && it->first > i; ++it) longer = checked_add(longer, it->second, "position_freq");
    next = checked_add(next, longer, "position_freq");
    curve.f[static_cast<std::size_t>(i)] = next;
  }
  return curve;
}

double tail_share(const FreqCurve& curve, std::int64_t from_pos) {
  if (from_pos < 0 || from_pos >= curve.train_len)
    throw ContractViolation("tail_share: position outside [0, L)");
  long double total = 0;
  long double tail = 0;
  for (std::size_t i = 0; i < curve.f.size(); ++i) {
    total += static_cast<long double>(curve.f[i]);
    if (static_cast<std::int64_t>(i) >= from_pos) tail += static_cast<long double>(curve.f[i]);
  }
  return total > 0 ? static_cast<double>(tail / total) : 0.0;
}

void export_curve(const FreqCurve& curve, std::ostream& sink) {
  sink << "position,frequency\n";
  for (std::size_t i = 0; i < curve.f.size(); ++i) sink << i << ',' << curve.f[i] << '\n';
  sink.flush();
  if (!sink) throw std::runtime_error("export_curve: write failed");
}

FreqCurve load_curve(std::istream& source) {
  FreqCurve curve;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(source, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const bool first = !seen_content;
    seen_content = true;
    std::int64_t pos = 0;
    std::int64_t freq = 0;
    if (!parse_pair(line, pos, freq)) {
      if (first && looks_like_header(line)) continue;
      throw ParseError(line_no, "expected `position,frequency`");
    }
    if (pos != static_cast<std::int64_t>(curve.f.size()))
      throw ParseError(line_no, "positions must be consecutive from 0");
    curve.f.push_back(freq);
  }
  if (curve.f.empty()) throw ParseError(0, "no records");
  curve.train_len = static_cast<std::int64_t>(curve.f.size());
  return curve;
}

}  // namespace string_rope
