#include "planepose/error.hpp"

namespace planepose {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::InvalidRotation: return "InvalidRotation";
    case ErrorKind::NotUnit: return "NotUnit";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::BadDims: return "BadDims";
    case ErrorKind::BadStrength: return "BadStrength";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::Collinear: return "Collinear";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::LabelMismatch: return "LabelMismatch";
    case ErrorKind::FlatImage: return "FlatImage";
    case ErrorKind::UnknownVolume: return "UnknownVolume";
    case ErrorKind::SessionGone: return "SessionGone";
    case ErrorKind::StorageError: return "StorageError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace planepose
