#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rqvqa {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Metadata,
  MissingFrame,
  TruncatedFrame,
  ShortVideo,
  Geometry,
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  DimMismatch,
  CountMismatch,
  ChecksumMismatch,
  GranularityMismatch,
  MissingSource,
  Probability,
  NonFinite,
  ZeroVariance,
  Degenerate,
  LayoutMismatch,
  Config,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code; `what()` is the human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace rqvqa
