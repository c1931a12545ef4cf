#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relloc {

enum class ErrorCode {
  IndexOutOfRange,
  SelfLoop,
  NonFinite,
  EmptyBounds,
  EdgeNotInGraph,
  NonPositiveDt,
  NonPositiveSigma,
  MissingAgentOdometry,
  ShapeMismatch,
  InsufficientReferences,
  DegenerateGeometry,
  EmptyTrainingSet,
  WindowSizeMismatch,
  InvalidConfig,
  NoOverlappingTimestamps,
  DegenerateReference,
  SeedMismatch,
  InvalidArgument,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace relloc
