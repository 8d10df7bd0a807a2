#include "bandpose/error.hpp"

namespace bandpose {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::InvalidKernel: return "invalid-kernel";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Io: return "io";
    case ErrorKind::InsufficientCalibrationData: return "insufficient-calibration-data";
    case ErrorKind::ConfigMismatch: return "config-mismatch";
    case ErrorKind::InsufficientRegions: return "insufficient-regions";
    case ErrorKind::DegenerateSample: return "degenerate-sample";
    case ErrorKind::PointerNotFound: return "pointer-not-found";
    case ErrorKind::NoEdges: return "no-edges";
    case ErrorKind::InsufficientEdges: return "insufficient-edges";
    case ErrorKind::NoAssociation: return "no-association";
    case ErrorKind::InsufficientMatches: return "insufficient-matches";
    case ErrorKind::DegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::BehindCamera: return "behind-camera";
    case ErrorKind::DegenerateInitialization: return "degenerate-initialization";
    case ErrorKind::InsufficientCorrespondences: return "insufficient-correspondences";
    case ErrorKind::PoseFailure: return "pose-failure";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, std::string stage, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " [" + stage + "]: " + message),
      kind_(kind),
      stage_(std::move(stage)),
      detail_(message) {}

}  // namespace bandpose
