// knnctc/errors.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#ifndef KNNCTC_ERRORS_H_
#define KNNCTC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace knnctc {

enum class ErrorCode {
  kUsage,
  kIo,
  kDuplicateToken,
  kEmptyVocabulary,
  kBlankOutOfRange,
  kInvalidLogits,
  kInvalidPosteriors,
  kInvalidConfig,
  kDimMismatch,
  kUnsupportedFormat,
  kCorruptFile,
  kDuplicateUttId,
  kTooManyCentroids,
  kEmptyRetrieval,
  kUndefinedRate,
};

const char *ErrorCodeName(ErrorCode code);

// All library failures are reported as Error; what() is prefixed with the
// code name, e.g. "DimMismatch: query has 3 dims, datastore has 4".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace knnctc

#endif  // KNNCTC_ERRORS_H_
