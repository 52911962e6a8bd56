#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bqsl {

// Invalid parameters or mismatched dimensions.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the domain of a function (time, site index).
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Exact enumeration requested past its size limit.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

// Malformed text input; line is 1-based.
struct ParseError : std::runtime_error {
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

// Paired-run budget mismatch and similar benchmark contract breaks.
struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace bqsl
