#include "coverdet/error.hpp"

namespace coverdet {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParam: return "InvalidParam";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNumericalFault: return "NumericalFault";
    case ErrorCode::kMalformedContainer: return "MalformedContainer";
    case ErrorCode::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::kEmptyAudio: return "EmptyAudio";
    case ErrorCode::kClipTooShort: return "ClipTooShort";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kNoOpenClique: return "NoOpenClique";
    case ErrorCode::kDuplicateTrack: return "DuplicateTrack";
    case ErrorCode::kEmptyManifest: return "EmptyManifest";
    case ErrorCode::kInsufficientDiversity: return "InsufficientDiversity";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kBatchUnderfull: return "BatchUnderfull";
    case ErrorCode::kMissingFeature: return "MissingFeature";
    case ErrorCode::kDimMismatch: return "DimMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

}  // namespace coverdet
