// knnctc/frames_io.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// `.knnf` frames files and `.jsonl` transcript manifests.
//
// Frames file layout (all integers and floats little-endian):
//
//   "KNNF"  u32 version=1  u32 dim  u32 vocab  u8 value_kind
//   per utterance:
//     u32 id_len, id bytes, u32 T,
//     f32[T*dim]   embeddings, row-major
//     f32[T*vocab] posteriors (value_kind 0) or logits (value_kind 1)

#ifndef KNNCTC_FRAMES_IO_H_
#define KNNCTC_FRAMES_IO_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knnctc/core.h"

namespace knnctc {

enum class ValueKind : uint8_t { kProbabilities = 0, kLogits = 1 };

struct FramesFileHeader {
  static constexpr char kMagic[4] = {'K', 'N', 'N', 'F'};
  static constexpr uint32_t kVersion = 1;
  static constexpr std::size_t kBytes = 17;

  uint32_t dim = 0;
  uint32_t vocab = 0;
  ValueKind value_kind = ValueKind::kProbabilities;

  bool operator==(const FramesFileHeader &) const = default;
};

// Streaming writer. Utterances are checked against the header dims; with
// value_kind=0 the posterior rows are validated too.
class FramesWriter {
 public:
  FramesWriter(const std::string &path, const FramesFileHeader &header);
  ~FramesWriter();
  FramesWriter(const FramesWriter &) = delete;
  FramesWriter &operator=(const FramesWriter &) = delete;

  void Write(const UtteranceFrames &utt);
  void Close();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

void WriteFrames(const std::string &path, const FramesFileHeader &header,
                 std::span<const UtteranceFrames> utterances);

// Streaming reader holding at most one utterance in memory. Logit files are
// converted to probabilities on the fly, so callers always receive
// posteriors.
class FramesReader {
 public:
  explicit FramesReader(const std::string &path);
  ~FramesReader();
  FramesReader(const FramesReader &) = delete;
  FramesReader &operator=(const FramesReader &) = delete;

  const FramesFileHeader &header() const { return header_; }

  // Returns nullopt at a clean end of file; throws CorruptFile on truncation.
  std::optional<UtteranceFrames> Next();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
  FramesFileHeader header_;
};

std::vector<UtteranceFrames> ReadAllFrames(const std::string &path,
                                           FramesFileHeader *header = nullptr);

struct ManifestEntry {
  std::string utt_id;
  std::string text;

  bool operator==(const ManifestEntry &) const = default;
};

// JSON lines: {"utt_id": "...", "text": "..."}. Duplicate ids are rejected
// with DuplicateUttId. Hypothesis files use the same format.
std::vector<ManifestEntry> ReadManifest(const std::string &path);
void WriteManifest(const std::string &path,
                   std::span<const ManifestEntry> entries);
std::string ManifestLine(const ManifestEntry &entry);

}  // namespace knnctc

#endif  // KNNCTC_FRAMES_IO_H_
