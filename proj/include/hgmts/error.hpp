#pragma once

#include <stdexcept>
#include <string>

namespace hgmts {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (CSV, checkpoint, config).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace hgmts
