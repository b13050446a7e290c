#pragma once

#include <stdexcept>
#include <string>

namespace string_rope {

// Violated precondition of a library call (shape mismatch, index out of range, ...).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// StringParams that break 0 <= W < S < L.
class InvalidParams : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class MaterializationRefused : public std::length_error {
public:
  using std::length_error::length_error;
};

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  // 1-based; 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace string_rope
