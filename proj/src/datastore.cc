// src/datastore.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/datastore.h"

#include <cstring>

#include "binary_io.h"

namespace knnctc {

namespace {

constexpr char kMagic[4] = {'K', 'N', 'D', 'S'};
constexpr uint32_t kVersion = 1;
// magic, version, dim, vocab, blank_id, pruned, count, tag_len
constexpr uint64_t kFixedHeaderBytes = 4 + 4 + 4 + 4 + 4 + 1 + 8 + 4;
constexpr uint64_t kTrailerBytes = 8 + 8;

template <typename T>
std::vector<uint32_t> ArgmaxRows(const Matrix<T> &m) {
  std::vector<uint32_t> out(m.rows());
  for (std::size_t t = 0; t != m.rows(); ++t) {
    auto row = m.Row(t);
    uint32_t best = 0;
    for (uint32_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[t] = best;
  }
  return out;
}

}  // namespace

std::vector<uint32_t> PseudoLabels(const Matrix<float> &posteriors) {
  return ArgmaxRows(posteriors);
}

std::vector<uint32_t> PseudoLabels(const Matrix<double> &posteriors) {
  return ArgmaxRows(posteriors);
}

DatastoreBuilder::DatastoreBuilder(uint32_t dim, uint32_t vocab,
                                   uint32_t blank_id, bool skip_blank_store,
                                   std::string source_tag) {
  if (vocab > 0 && blank_id >= vocab) {
    throw Error(ErrorCode::kBlankOutOfRange,
                "blank id " + std::to_string(blank_id) + " >= vocab " +
                    std::to_string(vocab));
  }
  ds_.keys = Matrix<float>(0, dim);
  ds_.dim = dim;
  ds_.vocab = vocab;
  ds_.blank_id = blank_id;
  ds_.pruned = skip_blank_store;
  ds_.source_tag = std::move(source_tag);
}

void DatastoreBuilder::Add(const UtteranceFrames &utt) {
  if (utt.num_frames() == 0) return;
  if (utt.embeddings.cols() != ds_.dim || utt.posteriors.cols() != ds_.vocab ||
      utt.posteriors.rows() != utt.num_frames()) {
    throw Error(ErrorCode::kDimMismatch,
                "utterance " + utt.utt_id + " is " +
                    std::to_string(utt.embeddings.cols()) + "/" +
                    std::to_string(utt.posteriors.cols()) +
                    " (dim/vocab), datastore is " + std::to_string(ds_.dim) +
                    "/" + std::to_string(ds_.vocab));
  }
  const auto labels = PseudoLabels(utt.posteriors);
  for (std::size_t t = 0; t != labels.size(); ++t) {
    const bool blank = labels[t] == ds_.blank_id;
    ++ds_.source_frames;
    if (blank) ++ds_.source_blank_frames;
    if (blank && ds_.pruned) continue;
    ds_.keys.AppendRow(utt.embeddings.Row(t));
    ds_.values.push_back(labels[t]);
  }
}

Datastore DatastoreBuilder::Finish() && { return std::move(ds_); }

Datastore BuildDatastore(std::span<const UtteranceFrames> corpus,
                         bool skip_blank_store, uint32_t blank_id,
                         std::string source_tag) {
  uint32_t dim = 0;
  uint32_t vocab = 0;
  for (const auto &utt : corpus) {
    if (utt.num_frames() > 0) {
      dim = static_cast<uint32_t>(utt.embeddings.cols());
      vocab = static_cast<uint32_t>(utt.posteriors.cols());
      break;
    }
  }
  DatastoreBuilder builder(dim, vocab, blank_id, skip_blank_store,
                           std::move(source_tag));
  for (const auto &utt : corpus) builder.Add(utt);
  return std::move(builder).Finish();
}

uint64_t SerializedSize(const Datastore &ds) {
  return kFixedHeaderBytes + ds.source_tag.size() +
         uint64_t{ds.size()} * ds.dim * 4 + uint64_t{ds.size()} * 4 +
         kTrailerBytes;
}

void SaveDatastore(const std::string &path, const Datastore &ds) {
  if (ds.keys.rows() != ds.values.size()) {
    throw Error(ErrorCode::kDimMismatch, "datastore key/value counts differ");
  }
  internal::BinaryWriter out(path);
  out.Bytes(kMagic, 4);
  out.U32(kVersion);
  out.U32(ds.dim);
  out.U32(ds.vocab);
  out.U32(ds.blank_id);
  out.U8(ds.pruned ? 1 : 0);
  out.U64(ds.size());
  out.String(ds.source_tag);
  out.F32s(ds.keys.data());
  out.U32s(ds.values);
  out.U64(ds.source_frames);
  out.U64(ds.source_blank_frames);
  out.Close();
}

Datastore LoadDatastore(const std::string &path) {
  internal::BinaryReader in(path);
  if (in.remaining() < 8) {
    throw Error(ErrorCode::kUnsupportedFormat, path + ": not a KNDS datastore");
  }
  char magic[4];
  in.Bytes(magic, 4, "magic");
  const uint32_t version = in.U32("version");
  if (std::memcmp(magic, kMagic, 4) != 0 || version != kVersion) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path + ": not a version-1 KNDS datastore");
  }
  Datastore ds;
  ds.dim = in.U32("dim");
  ds.vocab = in.U32("vocab");
  ds.blank_id = in.U32("blank_id");
  ds.pruned = in.U8("pruned") != 0;
  const uint64_t count = in.U64("count");
  ds.source_tag = in.String("source tag");
  in.Require(count * (uint64_t{ds.dim} * 4 + 4) + kTrailerBytes, "entries");
  ds.keys = Matrix<float>(count, ds.dim);
  ds.values.resize(count);
  in.F32s(ds.keys.data(), "keys");
  in.U32s(ds.values, "values");
  ds.source_frames = in.U64("source frame count");
  ds.source_blank_frames = in.U64("source blank count");
  for (uint32_t v : ds.values) {
    if (v >= ds.vocab || (ds.pruned && v == ds.blank_id)) {
      throw Error(ErrorCode::kCorruptFile,
                  path + ": value " + std::to_string(v) + " is invalid");
    }
  }
  return ds;
}

DatastoreStats ComputeStats(const Datastore &ds) {
  DatastoreStats s;
  s.count = ds.size();
  s.bytes = SerializedSize(ds);
  s.blank_fraction_of_source =
      ds.source_frames == 0
          ? 0.0
          : static_cast<double>(ds.source_blank_frames) / ds.source_frames;
  return s;
}

}  // namespace knnctc
