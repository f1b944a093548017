#pragma once

#include <stdexcept>
#include <string>

namespace sdgh {

/// A field carries NaN or infinite samples.
class InvalidField : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter lies outside the range where an operation is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The requested combination is recognised but not implemented (e.g. K>1 Girsanov).
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration problem; `field` names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sdgh
