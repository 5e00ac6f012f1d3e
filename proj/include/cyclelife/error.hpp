#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cyclelife {

enum class ErrorKind {
  InvalidArgument,
  MissingManifest,
  SchemaVersionMismatch,
  ValidationFailure,
  ParseError,
  IoError,
  NoCrossing,
  DegenerateSplit,
  MissingCurve,
  EmptyDataset,
  DimensionMismatch,
  SingularSystem,
  NoValidSplit,
  NoConsensus,
  MissingChannel,
  ShapeMismatch,
  NumericalDivergence,
  ZeroTarget,
  ConstantTargets,
  UnsupportedFormat,
  InvalidConfig,
};

std::string_view to_string(ErrorKind kind);

/// A single dataset rule violation, reported as `cell_id: rule`.
struct Violation {
  std::string cell_id;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Thrown by dataset loading; carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace cyclelife
