#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace limbreg {

/// Failure categories. Each one maps to a distinct CLI exit code.
enum class ErrorCode : int {
  ChannelMismatch = 10,
  Size,
  DegenerateHistogram,
  EmptyMask,
  DegenerateGeometry,
  Parameter,
  NoValley,
  MaskGap,
  Matching,
  DegenerateConfiguration,
  DuplicatePoint,
  SingularSystem,
  SingularTransform,
  UndefinedMetric,
  EmptySet,
  Fit,
  Parse,
  Range,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ChannelMismatch: return "channel_mismatch";
    case ErrorCode::Size: return "size";
    case ErrorCode::DegenerateHistogram: return "degenerate_histogram";
    case ErrorCode::EmptyMask: return "empty_mask";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::Parameter: return "parameter";
    case ErrorCode::NoValley: return "no_valley";
    case ErrorCode::MaskGap: return "mask_gap";
    case ErrorCode::Matching: return "matching";
    case ErrorCode::DegenerateConfiguration: return "degenerate_configuration";
    case ErrorCode::DuplicatePoint: return "duplicate_point";
    case ErrorCode::SingularSystem: return "singular_system";
    case ErrorCode::SingularTransform: return "singular_transform";
    case ErrorCode::UndefinedMetric: return "undefined_metric";
    case ErrorCode::EmptySet: return "empty_set";
    case ErrorCode::Fit: return "fit";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Range: return "range";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(stage.empty() ? message : stage + ": " + message),
        code_(code),
        stage_(std::move(stage)),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  /// Message without the stage prefix.
  const std::string& detail() const noexcept { return detail_; }

  /// Same error re-tagged with the pipeline stage it came from.
  Error with_stage(std::string stage) const { return Error(code_, detail_, std::move(stage)); }

 private:
  ErrorCode code_;
  std::string stage_;
  std::string detail_;
};

}  // namespace limbreg
