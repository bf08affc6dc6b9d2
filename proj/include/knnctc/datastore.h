// knnctc/datastore.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-level key/value datastore. Keys are per-frame embeddings and values
// are CTC pseudo labels (per-frame argmax of the posterior). Transcripts are
// never consulted, so the same builder serves labeled training data and
// unlabeled target-domain data.
//
// `.knds` layout (little-endian):
//
//   "KNDS"  u32 version=1  u32 dim  u32 vocab  u32 blank_id  u8 pruned
//   u64 count  u32 tag_len  tag bytes
//   f32[count*dim] keys, row-major
//   u32[count]     values
//   u64 source_frames  u64 source_blank_frames

#ifndef KNNCTC_DATASTORE_H_
#define KNNCTC_DATASTORE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "knnctc/core.h"

namespace knnctc {

struct Datastore {
  Matrix<float> keys;            // N x dim
  std::vector<uint32_t> values;  // N pseudo labels
  uint32_t dim = 0;
  uint32_t vocab = 0;
  uint32_t blank_id = 0;
  bool pruned = false;
  std::string source_tag;
  // Frames seen at build time, and how many of them were blank-labeled.
  uint64_t source_frames = 0;
  uint64_t source_blank_frames = 0;

  std::size_t size() const { return values.size(); }
  std::span<const float> Key(std::size_t i) const { return keys.Row(i); }

  bool operator==(const Datastore &) const = default;
};

// Per-frame argmax, lowest id on ties.
std::vector<uint32_t> PseudoLabels(const Matrix<float> &posteriors);
std::vector<uint32_t> PseudoLabels(const Matrix<double> &posteriors);

// Appends utterances in the order given.
class DatastoreBuilder {
 public:
  DatastoreBuilder(uint32_t dim, uint32_t vocab, uint32_t blank_id,
                   bool skip_blank_store, std::string source_tag = "");

  // Throws DimMismatch if the utterance does not match dim/vocab.
  void Add(const UtteranceFrames &utt);
  Datastore Finish() &&;

 private:
  Datastore ds_;
};

// Dims are taken from the first non-empty utterance.
Datastore BuildDatastore(std::span<const UtteranceFrames> corpus,
                         bool skip_blank_store, uint32_t blank_id,
                         std::string source_tag = "");

void SaveDatastore(const std::string &path, const Datastore &ds);
Datastore LoadDatastore(const std::string &path);

// Exact size of the serialized file in bytes.
uint64_t SerializedSize(const Datastore &ds);

struct DatastoreStats {
  uint64_t count = 0;
  uint64_t bytes = 0;
  double blank_fraction_of_source = 0.0;
};

DatastoreStats ComputeStats(const Datastore &ds);

}  // namespace knnctc

#endif  // KNNCTC_DATASTORE_H_
