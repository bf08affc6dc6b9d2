// knnctc/synth.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic corpora with known class geometry. Label 0 is the
// blank; labels 1..num_classes are CJK characters starting at U+4E00 so the
// transcripts score naturally at character level.
//
// Class centers do not depend on the seed: label l sits on axis (l mod dim)
// with sign + for even (l div dim) and - for odd, at distance
// sqrt(dim) * (1 + (l div dim) / 2) from the origin, and every coordinate
// is then shifted by center_offset. Corpora drawn with different seeds are
// therefore mutually compatible.
//
// Each frame draws a true label (blank with probability blank_rate, else a
// uniform class), an embedding = center + N(0, noise_sigma^2) per dimension,
// and a posterior row softmax(sharpness * onehot(shown)), where shown is the
// true label except with probability posterior_error_rate, when it is a
// uniformly chosen different label.

#ifndef KNNCTC_SYNTH_H_
#define KNNCTC_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "knnctc/core.h"
#include "knnctc/frames_io.h"

namespace knnctc {

struct SynthConfig {
  uint64_t seed = 0;
  std::size_t num_utts = 10;
  std::size_t min_frames = 20;
  std::size_t max_frames = 40;
  std::size_t num_classes = 20;
  std::size_t dim = 16;
  double blank_rate = 0.5;
  double noise_sigma = 0.2;
  double posterior_error_rate = 0.0;
  double posterior_sharpness = 5.0;
  double center_offset = 0.0;
  std::string utt_prefix = "utt";

  // Throws InvalidConfig.
  void Validate() const;
};

struct SynthCorpus {
  Vocabulary vocab{{"<blank>", "a"}};
  std::size_t dim = 1;
  std::vector<UtteranceFrames> utterances;
  std::vector<ManifestEntry> manifest;
  std::vector<std::vector<uint32_t>> frame_labels;  // true labels
  uint64_t total_frames = 0;
  uint64_t true_blank_frames = 0;
  // Frames whose posterior argmax is blank: exactly what a pruned build drops.
  uint64_t argmax_blank_frames = 0;
  uint64_t corrupted_frames = 0;

  FramesFileHeader header() const;
};

Vocabulary SynthVocabulary(std::size_t num_classes);
std::vector<float> ClassCenter(uint32_t label, std::size_t dim,
                               double center_offset = 0.0);

SynthCorpus GenerateCorpus(const SynthConfig &cfg);

// Writes <prefix>.knnf, <prefix>.jsonl, <prefix>.labels.jsonl and
// <prefix>.vocab.txt.
void WriteSynthCorpus(const SynthCorpus &corpus, const std::string &prefix);

}  // namespace knnctc

#endif  // KNNCTC_SYNTH_H_
