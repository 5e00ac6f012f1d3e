#include "cyclelife/error.hpp"

namespace cyclelife {
namespace {

std::string summarize(const std::vector<Violation>& violations) {
  std::string msg = "dataset validation failed (" + std::to_string(violations.size()) + " violation";
  if (violations.size() != 1) msg += "s";
  msg += ")";
  for (const auto& v : violations) msg += "\n" + v.cell_id + ": " + v.rule;
  return msg;
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::MissingManifest: return "MissingManifest";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::ValidationFailure: return "ValidationFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::NoCrossing: return "NoCrossing";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::MissingCurve: return "MissingCurve";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoValidSplit: return "NoValidSplit";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::MissingChannel: return "MissingChannel";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::ZeroTarget: return "ZeroTarget";
    case ErrorKind::ConstantTargets: return "ConstantTargets";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(ErrorKind::ValidationFailure, summarize(violations)),
      violations_(std::move(violations)) {}

}  // namespace cyclelife
