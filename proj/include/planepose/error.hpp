#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace planepose {

enum class ErrorKind {
  DegenerateInput,
  InvalidRotation,
  NotUnit,
  EmptySet,
  Degenerate,
  FormatError,
  DimensionMismatch,
  IoError,
  BadDims,
  BadStrength,
  TooFewPoints,
  Collinear,
  EmptyMask,
  LabelMismatch,
  FlatImage,
  UnknownVolume,
  SessionGone,
  StorageError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Domain error carrying a machine-readable kind. Every failure the library
/// reports to callers is one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace planepose
