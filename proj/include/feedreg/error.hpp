#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace feedreg {

enum class ErrorCode {
  DegenerateProjection,
  SingularMatrix,
  InsufficientPairs,
  DegenerateConfiguration,
  EmptyCorrespondences,
  ImageTooSmall,
  DimensionMismatch,
  TemplateTooLarge,
  InvalidPrior,
  SpecInvalid,
  EmptyBaseline,
  InvalidArgument,
  Io,
  Parse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateProjection: return "DegenerateProjection";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EmptyCorrespondences: return "EmptyCorrespondences";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TemplateTooLarge: return "TemplateTooLarge";
    case ErrorCode::InvalidPrior: return "InvalidPrior";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::EmptyBaseline: return "EmptyBaseline";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// Exception type thrown by every library operation; carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace feedreg
