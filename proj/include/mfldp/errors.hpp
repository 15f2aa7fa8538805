#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfldp {

/// Rate-expression syntax error; offset() is the byte position in the source text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

  [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Expression evaluated outside its domain (log of a nonpositive value, non-finite result).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model or configuration rejected by validation. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to produce a trustworthy answer. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The McKean-Vlasov flow has an omega-limit set that is not a catalogued point equilibrium.
class UnsupportedDynamics : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mfldp
