#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpga {

/// Invalid user-supplied configuration. Carries the offending key and source
/// line when known (line 0 means "not from a file").
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {},
                       std::size_t line = 0)
      : std::runtime_error(what), key_(std::move(key)), line_(line) {}

  const std::string& key() const noexcept { return key_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

/// A caller broke a precondition (dimension mismatch, bad index, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Client/server state machine went out of sequence.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed DPG1 wire message; position is the byte offset of the fault.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t position, const std::string& what)
      : std::runtime_error(what + " at byte " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Malformed metrics CSV; row is 1-based and counts the header as row 1.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace dpga
