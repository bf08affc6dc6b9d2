// src/fusion_decoder.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/fusion_decoder.h"

#include <algorithm>
#include <cmath>

namespace knnctc {

namespace {

template <typename T>
uint32_t ArgmaxImpl(std::span<const T> p) {
  uint32_t best = 0;
  for (uint32_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

std::vector<double> NormalizedRow(std::span<const float> row) {
  std::vector<double> p(row.begin(), row.end());
  double sum = 0;
  for (double v : p) sum += v;
  for (double &v : p) v /= sum;
  return p;
}

}  // namespace

uint32_t Argmax(std::span<const double> p) { return ArgmaxImpl(p); }
uint32_t Argmax(std::span<const float> p) { return ArgmaxImpl(p); }

std::vector<double> ComputePknn(const NeighborSet &neighbors, double tau,
                                std::size_t vocab) {
  if (neighbors.empty()) {
    throw Error(ErrorCode::kEmptyRetrieval, "no neighbors retrieved");
  }
  if (!(tau > 0)) {
    throw Error(ErrorCode::kInvalidConfig, "tau must be positive");
  }
  double d_min = neighbors.front().distance;
  for (const auto &n : neighbors) d_min = std::min(d_min, n.distance);

  std::vector<double> p(vocab, 0.0);
  double total = 0;
  for (const auto &n : neighbors) {
    if (n.value >= vocab) {
      throw Error(ErrorCode::kDimMismatch,
                  "neighbor value " + std::to_string(n.value) +
                      " outside vocabulary of " + std::to_string(vocab));
    }
    const double w = std::exp(-(n.distance - d_min) / tau);
    p[n.value] += w;
    total += w;
  }
  for (double &v : p) v /= total;
  return p;
}

std::vector<double> Fuse(std::span<const double> p_knn,
                         std::span<const double> p_ctc, double lambda) {
  if (p_knn.size() != p_ctc.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "p_knn has " + std::to_string(p_knn.size()) +
                    " entries, p_ctc has " + std::to_string(p_ctc.size()));
  }
  std::vector<double> out(p_ctc.size());
  for (std::size_t i = 0; i != out.size(); ++i) {
    out[i] = lambda * p_knn[i] + (1.0 - lambda) * p_ctc[i];
  }
  return out;
}

std::vector<uint32_t> CtcCollapse(std::span<const uint32_t> ids,
                                  uint32_t blank_id) {
  std::vector<uint32_t> out;
  bool have_prev = false;
  uint32_t prev = 0;
  for (uint32_t id : ids) {
    if (id != blank_id && !(have_prev && id == prev)) out.push_back(id);
    prev = id;
    have_prev = true;
  }
  return out;
}

std::vector<uint32_t> GreedyCtcDecode(const Matrix<float> &posteriors,
                                      uint32_t blank_id) {
  std::vector<uint32_t> path(posteriors.rows());
  for (std::size_t t = 0; t != path.size(); ++t) {
    path[t] = Argmax(posteriors.Row(t));
  }
  return CtcCollapse(path, blank_id);
}

FrameDistributions ComputeFrameDistributions(const UtteranceFrames &utt,
                                             const Searcher &searcher,
                                             const FusionConfig &cfg) {
  cfg.Validate();
  const Datastore &ds = searcher.datastore();
  const std::size_t t_max = utt.num_frames();
  if (t_max > 0 && ((ds.dim != 0 && utt.embeddings.cols() != ds.dim) ||
                    (ds.vocab != 0 && utt.posteriors.cols() != ds.vocab))) {
    throw Error(ErrorCode::kDimMismatch,
                "utterance " + utt.utt_id + " is " +
                    std::to_string(utt.embeddings.cols()) + "/" +
                    std::to_string(utt.posteriors.cols()) +
                    " (dim/vocab), datastore is " + std::to_string(ds.dim) +
                    "/" + std::to_string(ds.vocab));
  }
  if (t_max > 0 && cfg.blank_id >= utt.posteriors.cols()) {
    throw Error(
        ErrorCode::kBlankOutOfRange,
        "blank id " + std::to_string(cfg.blank_id) + " outside vocabulary");
  }

  FrameDistributions out;
  out.p_ctc.reserve(t_max);
  out.p_knn.reserve(t_max);
  out.skipped.reserve(t_max);
  out.stats.frames = t_max;
  const std::size_t vocab = utt.posteriors.cols();
  for (std::size_t t = 0; t != t_max; ++t) {
    out.p_ctc.push_back(NormalizedRow(utt.posteriors.Row(t)));
    if (cfg.skip_blank_decode &&
        Argmax(utt.posteriors.Row(t)) == cfg.blank_id) {
      out.p_knn.emplace_back(std::nullopt);
      out.skipped.push_back(true);
      ++out.stats.skipped_frames;
      continue;
    }
    out.skipped.push_back(false);
    if (ds.size() == 0) {
      out.p_knn.emplace_back(std::nullopt);
      ++out.stats.empty_retrievals;
      continue;
    }
    ++out.stats.queries;
    const NeighborSet neighbors =
        searcher.Search(utt.embeddings.Row(t), cfg.k, cfg.distance_kind);
    if (neighbors.empty()) {
      out.p_knn.emplace_back(std::nullopt);
      ++out.stats.empty_retrievals;
      continue;
    }
    out.p_knn.emplace_back(ComputePknn(neighbors, cfg.tau, vocab));
  }
  return out;
}

DecodeResult FuseFrames(const FrameDistributions &dists, double lambda,
                        uint32_t blank_id) {
  DecodeResult result;
  result.stats = dists.stats;
  result.frames.reserve(dists.p_ctc.size());
  std::vector<uint32_t> path;
  path.reserve(dists.p_ctc.size());
  for (std::size_t t = 0; t != dists.p_ctc.size(); ++t) {
    FrameDecision f;
    f.p_ctc = dists.p_ctc[t];
    f.p_knn = dists.p_knn[t];
    f.skipped = dists.skipped[t];
    f.p_fused = f.p_knn ? Fuse(*f.p_knn, f.p_ctc, lambda) : f.p_ctc;
    f.token_id = Argmax(f.p_fused);
    path.push_back(f.token_id);
    result.frames.push_back(std::move(f));
  }
  result.token_ids = CtcCollapse(path, blank_id);
  return result;
}

DecodeResult DecodeUtterance(const UtteranceFrames &utt,
                             const Searcher &searcher,
                             const FusionConfig &cfg) {
  return FuseFrames(ComputeFrameDistributions(utt, searcher, cfg), cfg.lambda,
                    cfg.blank_id);
}

}  // namespace knnctc
