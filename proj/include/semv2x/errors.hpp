#pragma once

#include <stdexcept>
#include <string>

namespace semv2x {

/// Config text could not be parsed or does not follow the schema.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line + 1) + ": " + what : what),
        line_(line) {}

  /// Zero-based line, or -1 when no position is known.
  int line() const { return line_; }

 private:
  int line_;
};

/// A configuration parsed fine but violates an invariant.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Argument outside the domain of a numerical operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed serialized payload or file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semv2x
