#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bandpose {

enum class ErrorKind {
  InvalidArgument,
  InvalidKernel,
  Numeric,
  Io,
  InsufficientCalibrationData,
  ConfigMismatch,
  InsufficientRegions,
  DegenerateSample,
  PointerNotFound,
  NoEdges,
  InsufficientEdges,
  NoAssociation,
  InsufficientMatches,
  DegenerateGeometry,
  BehindCamera,
  DegenerateInitialization,
  InsufficientCorrespondences,
  PoseFailure,
};

std::string_view to_string(ErrorKind kind);

// Every failure the library reports carries a kind (for exit codes and
// tests) and the pipeline stage that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  // The message without the kind/stage prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

}  // namespace bandpose
