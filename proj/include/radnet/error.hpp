#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radnet {

enum class ErrorCode {
  UnsupportedFormat,
  CorruptFile,
  MissingClassDir,
  EmptyClass,
  DegenerateSplit,
  IndexOutOfRange,
  DimMismatch,
  BadMagic,
  EmptyImage,
  InvalidSigma,
  ImageTooSmall,
  InvalidParam,
  InvalidLevels,
  EmptyComponent,
  ShapeMismatch,
  DegenerateBatch,
  StaleCache,
  EmptyDataset,
  LengthMismatch,
  EmptyMatrix,
  IoError,
  ConfigError,
};

inline constexpr std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::MissingClassDir: return "MissingClassDir";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::InvalidSigma: return "InvalidSigma";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::InvalidLevels: return "InvalidLevels";
    case ErrorCode::EmptyComponent: return "EmptyComponent";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code that
/// the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace radnet
