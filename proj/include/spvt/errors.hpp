#pragma once

#include <stdexcept>
#include <string>

namespace spvt {

// Shape/dimension mismatch between tensors, layers or boxes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation (e.g. tan near pi/2).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Caller violated a documented precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Non-finite values encountered during training or evaluation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable weight/dataset file.
struct LoadError : std::runtime_error {
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kCorrupt };
  Kind kind;
  LoadError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Invalid or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spvt
