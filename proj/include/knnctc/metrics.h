// knnctc/metrics.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// CER/WER scoring with substitution/deletion/insertion accounting.

#ifndef KNNCTC_METRICS_H_
#define KNNCTC_METRICS_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace knnctc {

struct ErrorCounts {
  uint64_t substitutions = 0;
  uint64_t deletions = 0;
  uint64_t insertions = 0;
  uint64_t correct = 0;
  uint64_t ref_len = 0;

  uint64_t errors() const { return substitutions + deletions + insertions; }
  // (S + D + I) / ref_len. Throws UndefinedRate when ref_len == 0.
  double Rate() const;

  ErrorCounts &operator+=(const ErrorCounts &o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    correct += o.correct;
    ref_len += o.ref_len;
    return *this;
  }
  bool operator==(const ErrorCounts &) const = default;
};

// Unit-cost Levenshtein alignment. Among minimum-cost alignments the one
// with the fewest deletions plus insertions is counted, so swapping ref and
// hyp swaps D and I exactly. Remaining ties prefer match, then substitution,
// then deletion, then insertion.
ErrorCounts AlignAndCount(std::span<const std::string> ref,
                          std::span<const std::string> hyp);

enum class TokenUnit { kChar, kWord };

TokenUnit ParseTokenUnit(std::string_view name);

// kChar: one token per UTF-8 code point, whitespace dropped (invalid bytes
// become single-byte tokens). kWord: whitespace-separated words.
std::vector<std::string> Tokenize(std::string_view text, TokenUnit unit);

struct CorpusResult {
  ErrorCounts counts;
  double rate = 0.0;
};

using TokenPair = std::pair<std::vector<std::string>, std::vector<std::string>>;

// Pools counts over (ref, hyp) pairs. Throws UndefinedRate when every
// reference is empty.
CorpusResult CorpusErrorRate(std::span<const TokenPair> pairs);

// {"S":..,"D":..,"I":..,"C":..,"ref_len":..,"rate":..}
std::string ToJson(const CorpusResult &result);
// Human-readable summary line, e.g. "CER 5.18% [S=5185 D=140 I=97 ...]".
std::string FormatReport(const CorpusResult &result, TokenUnit unit);

}  // namespace knnctc

#endif  // KNNCTC_METRICS_H_
