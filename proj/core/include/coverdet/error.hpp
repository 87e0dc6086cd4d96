#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coverdet {

enum class ErrorCode {
  kInvalidParam,
  kShapeMismatch,
  kNumericalFault,
  kMalformedContainer,
  kUnsupportedEncoding,
  kEmptyAudio,
  kClipTooShort,
  kIoFailure,
  kFormatVersionMismatch,
  kChecksumMismatch,
  kNoOpenClique,
  kDuplicateTrack,
  kEmptyManifest,
  kInsufficientDiversity,
  kEmptyDataset,
  kZeroVector,
  kMissingEmbedding,
  kBatchUnderfull,
  kMissingFeature,
  kDimMismatch,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure surfaced by the library. `what()` is "<CodeName>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& detail);

}  // namespace coverdet
