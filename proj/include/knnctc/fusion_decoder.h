// knnctc/fusion_decoder.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Retrieval-augmented greedy CTC decoding. For each frame the embedding is
// used as a query against the datastore; the neighbors' pseudo labels form a
// distribution
//
//   p_knn(y) ∝ Σ_{i : value_i = y} exp(-d_i / tau)
//
// which is interpolated with the CTC posterior
//
//   p(y) = lambda * p_knn(y) + (1 - lambda) * p_ctc(y)
//
// and the per-frame argmax sequence is collapsed into a transcript.

#ifndef KNNCTC_FUSION_DECODER_H_
#define KNNCTC_FUSION_DECODER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "knnctc/ann_index.h"
#include "knnctc/core.h"

namespace knnctc {

// Lowest index wins ties.
uint32_t Argmax(std::span<const double> p);
uint32_t Argmax(std::span<const float> p);

// Throws EmptyRetrieval on an empty neighbor set and InvalidConfig for
// tau <= 0. Weights are shifted by the minimum distance before
// exponentiation; the normalized result is unchanged by the shift.
std::vector<double> ComputePknn(const NeighborSet &neighbors, double tau,
                                std::size_t vocab);

// lambda * p_knn + (1 - lambda) * p_ctc. Throws DimMismatch on length
// mismatch.
std::vector<double> Fuse(std::span<const double> p_knn,
                         std::span<const double> p_ctc, double lambda);

// Removes consecutive repeats, then blanks.
std::vector<uint32_t> CtcCollapse(std::span<const uint32_t> ids,
                                  uint32_t blank_id);

// Plain best-path CTC decoding of a posterior matrix.
std::vector<uint32_t> GreedyCtcDecode(const Matrix<float> &posteriors,
                                      uint32_t blank_id);

struct FrameDecision {
  uint32_t token_id = 0;
  std::vector<double> p_ctc;
  std::optional<std::vector<double>> p_knn;  // absent when not retrieved
  std::vector<double> p_fused;
  bool skipped = false;  // bypassed by skip-blank decoding
};

struct DecodeStats {
  uint64_t frames = 0;
  uint64_t queries = 0;
  uint64_t skipped_frames = 0;
  uint64_t empty_retrievals = 0;

  DecodeStats &operator+=(const DecodeStats &o) {
    frames += o.frames;
    queries += o.queries;
    skipped_frames += o.skipped_frames;
    empty_retrievals += o.empty_retrievals;
    return *this;
  }
  bool operator==(const DecodeStats &) const = default;
};

// Per-frame CTC and kNN distributions, independent of lambda. Computing
// these once lets a lambda sweep reuse the retrieval results.
struct FrameDistributions {
  std::vector<std::vector<double>> p_ctc;
  std::vector<std::optional<std::vector<double>>> p_knn;
  std::vector<bool> skipped;
  DecodeStats stats;
};

// Retrieval for every frame of `utt`. A frame whose CTC argmax is blank is
// not queried when cfg.skip_blank_decode is set. An empty datastore yields
// absent p_knn and bumps stats.empty_retrievals. Throws DimMismatch when the
// utterance does not match the datastore.
FrameDistributions ComputeFrameDistributions(const UtteranceFrames &utt,
                                             const Searcher &searcher,
                                             const FusionConfig &cfg);

struct DecodeResult {
  std::vector<uint32_t> token_ids;  // collapsed transcript
  std::vector<FrameDecision> frames;
  DecodeStats stats;
};

// Fuses precomputed distributions at `lambda`.
DecodeResult FuseFrames(const FrameDistributions &dists, double lambda,
                        uint32_t blank_id);

DecodeResult DecodeUtterance(const UtteranceFrames &utt,
                             const Searcher &searcher, const FusionConfig &cfg);

}  // namespace knnctc

#endif  // KNNCTC_FUSION_DECODER_H_
