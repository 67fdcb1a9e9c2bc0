#include "rqvqa/error.hpp"

namespace rqvqa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Metadata: return "metadata";
    case ErrorCode::MissingFrame: return "missing_frame";
    case ErrorCode::TruncatedFrame: return "truncated_frame";
    case ErrorCode::ShortVideo: return "short_video";
    case ErrorCode::Geometry: return "geometry";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::VersionMismatch: return "version_mismatch";
    case ErrorCode::TruncatedPayload: return "truncated_payload";
    case ErrorCode::DimMismatch: return "dim_mismatch";
    case ErrorCode::CountMismatch: return "count_mismatch";
    case ErrorCode::ChecksumMismatch: return "checksum_mismatch";
    case ErrorCode::GranularityMismatch: return "granularity_mismatch";
    case ErrorCode::MissingSource: return "missing_source";
    case ErrorCode::Probability: return "probability";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::ZeroVariance: return "zero_variance";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::LayoutMismatch: return "layout_mismatch";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

}  // namespace rqvqa
