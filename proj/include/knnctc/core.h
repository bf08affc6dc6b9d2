// knnctc/core.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Vocabulary, frame-level containers and decoding hyperparameters shared by
// every other module.

#ifndef KNNCTC_CORE_H_
#define KNNCTC_CORE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "knnctc/errors.h"

namespace knnctc {

// Dense row-major matrix with value semantics.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::kDimMismatch,
                  "matrix data has " + std::to_string(data_.size()) +
                      " elements, expected " + std::to_string(rows_ * cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<T> Row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> Row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  T &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T &operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  // Appends one row. On an empty 0x0 matrix the row fixes the width.
  void AppendRow(std::span<const T> row) {
    if (rows_ == 0 && cols_ == 0) cols_ = row.size();
    if (row.size() != cols_) {
      throw Error(ErrorCode::kDimMismatch,
                  "row has " + std::to_string(row.size()) +
                      " columns, matrix has " + std::to_string(cols_));
    }
    data_.insert(data_.end(), row.begin(), row.end());
    ++rows_;
  }

  void Reserve(std::size_t rows) { data_.reserve(rows * cols_); }

  bool operator==(const Matrix &other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

class Vocabulary {
 public:
  // Throws EmptyVocabulary, DuplicateToken or BlankOutOfRange.
  explicit Vocabulary(std::vector<std::string> tokens, uint32_t blank_id = 0);

  std::size_t size() const { return tokens_.size(); }
  uint32_t blank_id() const { return blank_id_; }
  const std::string &Token(uint32_t id) const { return tokens_.at(id); }
  const std::vector<std::string> &tokens() const { return tokens_; }
  std::optional<uint32_t> Find(std::string_view token) const;

  bool operator==(const Vocabulary &other) const {
    return tokens_ == other.tokens_ && blank_id_ == other.blank_id_;
  }

 private:
  std::vector<std::string> tokens_;
  uint32_t blank_id_;
  std::unordered_map<std::string, uint32_t> index_;
};

// One token per line, line index = token id. Trailing empty lines are ignored.
Vocabulary LoadVocabulary(const std::string &path, uint32_t blank_id = 0);
void WriteVocabulary(const std::string &path, const Vocabulary &vocab);

// Joins the tokens of `ids` with `joiner`.
std::string Detokenize(const Vocabulary &vocab, std::span<const uint32_t> ids,
                       std::string_view joiner = "");

// Everything the decoder sees of one utterance: T key vectors and T CTC
// posterior rows.
struct UtteranceFrames {
  std::string utt_id;
  Matrix<float> embeddings;  // T x D
  Matrix<float> posteriors;  // T x V

  std::size_t num_frames() const { return embeddings.rows(); }
  bool operator==(const UtteranceFrames &other) const = default;
};

// Row sums must be within this distance of 1 for a posterior row to be
// accepted.
inline constexpr double kPosteriorSumTolerance = 1e-4;

// Throws DimMismatch when the two matrices disagree on T, and
// InvalidPosteriors when a row is negative or does not sum to 1.
void ValidateUtterance(const UtteranceFrames &utt);

// Row-wise softmax with max subtraction, computed in double.
// Throws InvalidLogits on NaN or Inf.
Matrix<double> NormalizePosteriors(const Matrix<double> &logits);
Matrix<float> NormalizePosteriors(const Matrix<float> &logits);

enum class DistanceKind { kL2, kSquaredL2 };

const char *DistanceKindName(DistanceKind kind);
DistanceKind ParseDistanceKind(std::string_view name);

struct FusionConfig {
  double lambda = 0.0;
  double tau = 1.0;
  std::size_t k = 1024;
  bool skip_blank_decode = false;
  uint32_t blank_id = 0;
  DistanceKind distance_kind = DistanceKind::kL2;

  // Throws InvalidConfig unless 0 <= lambda <= 1, tau > 0 and k >= 1.
  void Validate() const;
};

}  // namespace knnctc

#endif  // KNNCTC_CORE_H_
