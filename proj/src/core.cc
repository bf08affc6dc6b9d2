// src/core.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/core.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace knnctc {

const char *ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
      return "Usage";
    case ErrorCode::kIo:
      return "Io";
    case ErrorCode::kDuplicateToken:
      return "DuplicateToken";
    case ErrorCode::kEmptyVocabulary:
      return "EmptyVocabulary";
    case ErrorCode::kBlankOutOfRange:
      return "BlankOutOfRange";
    case ErrorCode::kInvalidLogits:
      return "InvalidLogits";
    case ErrorCode::kInvalidPosteriors:
      return "InvalidPosteriors";
    case ErrorCode::kInvalidConfig:
      return "InvalidConfig";
    case ErrorCode::kDimMismatch:
      return "DimMismatch";
    case ErrorCode::kUnsupportedFormat:
      return "UnsupportedFormat";
    case ErrorCode::kCorruptFile:
      return "CorruptFile";
    case ErrorCode::kDuplicateUttId:
      return "DuplicateUttId";
    case ErrorCode::kTooManyCentroids:
      return "TooManyCentroids";
    case ErrorCode::kEmptyRetrieval:
      return "EmptyRetrieval";
    case ErrorCode::kUndefinedRate:
      return "UndefinedRate";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens, uint32_t blank_id)
    : tokens_(std::move(tokens)), blank_id_(blank_id) {
  if (tokens_.empty()) {
    throw Error(ErrorCode::kEmptyVocabulary, "vocabulary has no tokens");
  }
  if (blank_id_ >= tokens_.size()) {
    throw Error(ErrorCode::kBlankOutOfRange,
                "blank id " + std::to_string(blank_id_) +
                    " out of range for vocabulary of size " +
                    std::to_string(tokens_.size()));
  }
  index_.reserve(tokens_.size());
  for (uint32_t i = 0; i != tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], i);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateToken,
                  "token '" + tokens_[i] + "' appears at ids " +
                      std::to_string(it->second) + " and " + std::to_string(i));
    }
  }
}

std::optional<uint32_t> Vocabulary::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary LoadVocabulary(const std::string &path, uint32_t blank_id) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open vocabulary " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) tokens.push_back(line);
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return Vocabulary(std::move(tokens), blank_id);
}

void WriteVocabulary(const std::string &path, const Vocabulary &vocab) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  for (const auto &t : vocab.tokens()) os << t << '\n';
  if (!os) throw Error(ErrorCode::kIo, "write to " + path + " failed");
}

std::string Detokenize(const Vocabulary &vocab, std::span<const uint32_t> ids,
                       std::string_view joiner) {
  std::string out;
  for (std::size_t i = 0; i != ids.size(); ++i) {
    if (i) out += joiner;
    out += vocab.Token(ids[i]);
  }
  return out;
}

void ValidateUtterance(const UtteranceFrames &utt) {
  if (utt.embeddings.rows() != utt.posteriors.rows()) {
    throw Error(ErrorCode::kDimMismatch,
                "utterance " + utt.utt_id + " has " +
                    std::to_string(utt.embeddings.rows()) +
                    " embedding rows but " +
                    std::to_string(utt.posteriors.rows()) + " posterior rows");
  }
  for (std::size_t t = 0; t != utt.posteriors.rows(); ++t) {
    double sum = 0;
    for (float p : utt.posteriors.Row(t)) {
      if (!(p >= 0.0f) || !std::isfinite(p)) {
        throw Error(ErrorCode::kInvalidPosteriors,
                    "utterance " + utt.utt_id + " frame " + std::to_string(t) +
                        " has a negative or non-finite probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kPosteriorSumTolerance) {
      std::ostringstream msg;
      msg << "utterance " << utt.utt_id << " frame " << t << " sums to " << sum;
      throw Error(ErrorCode::kInvalidPosteriors, msg.str());
    }
  }
}

namespace {

template <typename T>
Matrix<T> Softmax(const Matrix<T> &logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  std::vector<double> buf(logits.cols());
  for (std::size_t r = 0; r != logits.rows(); ++r) {
    auto row = logits.Row(r);
    double max = -std::numeric_limits<double>::infinity();
    for (T v : row) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidLogits,
                    "row " + std::to_string(r) + " has a NaN or Inf logit");
      }
      max = std::max(max, static_cast<double>(v));
    }
    double sum = 0;
    for (std::size_t c = 0; c != row.size(); ++c) {
      buf[c] = std::exp(static_cast<double>(row[c]) - max);
      sum += buf[c];
    }
    auto dst = out.Row(r);
    for (std::size_t c = 0; c != row.size(); ++c) {
      dst[c] = static_cast<T>(buf[c] / sum);
    }
  }
  return out;
}

}  // namespace

Matrix<double> NormalizePosteriors(const Matrix<double> &logits) {
  return Softmax(logits);
}

Matrix<float> NormalizePosteriors(const Matrix<float> &logits) {
  return Softmax(logits);
}

const char *DistanceKindName(DistanceKind kind) {
  return kind == DistanceKind::kL2 ? "l2" : "squared_l2";
}

DistanceKind ParseDistanceKind(std::string_view name) {
  if (name == "l2") return DistanceKind::kL2;
  if (name == "squared_l2") return DistanceKind::kSquaredL2;
  throw Error(ErrorCode::kInvalidConfig,
              "unknown distance kind '" + std::string(name) + "'");
}

void FusionConfig::Validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "lambda must be in [0, 1], got " + std::to_string(lambda));
  }
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "tau must be positive, got " + std::to_string(tau));
  }
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
}

}  // namespace knnctc
