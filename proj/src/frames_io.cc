// src/frames_io.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/frames_io.h"

#include <cstring>
#include <fstream>
#include <unordered_set>

#include "binary_io.h"
#include "json.hpp"

namespace knnctc {

class FramesWriter::Impl {
 public:
  Impl(const std::string &path, const FramesFileHeader &header)
      : header(header), out(path) {}

  FramesFileHeader header;
  internal::BinaryWriter out;
  bool closed = false;
};

FramesWriter::FramesWriter(const std::string &path,
                           const FramesFileHeader &header) {
  if (header.dim == 0 || header.vocab < 2) {
    throw Error(ErrorCode::kInvalidConfig,
                "frames header needs dim > 0 and vocab > 1");
  }
  impl_ = std::make_unique<Impl>(path, header);
  auto &out = impl_->out;
  out.Bytes(FramesFileHeader::kMagic, 4);
  out.U32(FramesFileHeader::kVersion);
  out.U32(header.dim);
  out.U32(header.vocab);
  out.U8(static_cast<uint8_t>(header.value_kind));
}

FramesWriter::~FramesWriter() {
  if (impl_ && !impl_->closed) {
    try {
      impl_->out.Close();
    } catch (...) {
    }
  }
}

void FramesWriter::Write(const UtteranceFrames &utt) {
  const auto &h = impl_->header;
  const std::size_t t = utt.num_frames();
  if (utt.posteriors.rows() != t ||
      (t > 0 &&
       (utt.embeddings.cols() != h.dim || utt.posteriors.cols() != h.vocab))) {
    throw Error(ErrorCode::kDimMismatch,
                "utterance " + utt.utt_id + " is " +
                    std::to_string(utt.embeddings.cols()) + "/" +
                    std::to_string(utt.posteriors.cols()) +
                    " (dim/vocab), file expects " + std::to_string(h.dim) +
                    "/" + std::to_string(h.vocab));
  }
  if (h.value_kind == ValueKind::kProbabilities) ValidateUtterance(utt);
  auto &out = impl_->out;
  out.String(utt.utt_id);
  out.U32(static_cast<uint32_t>(t));
  out.F32s(utt.embeddings.data());
  out.F32s(utt.posteriors.data());
}

void FramesWriter::Close() {
  if (!impl_->closed) {
    impl_->closed = true;
    impl_->out.Close();
  }
}

void WriteFrames(const std::string &path, const FramesFileHeader &header,
                 std::span<const UtteranceFrames> utterances) {
  FramesWriter writer(path, header);
  for (const auto &utt : utterances) writer.Write(utt);
  writer.Close();
}

class FramesReader::Impl {
 public:
  explicit Impl(const std::string &path) : in(path) {}
  internal::BinaryReader in;
};

FramesReader::FramesReader(const std::string &path)
    : impl_(std::make_unique<Impl>(path)) {
  auto &in = impl_->in;
  char magic[4];
  if (in.remaining() < FramesFileHeader::kBytes) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path + ": too short for a frames header");
  }
  in.Bytes(magic, 4, "magic");
  uint32_t version = in.U32("version");
  if (std::memcmp(magic, FramesFileHeader::kMagic, 4) != 0 ||
      version != FramesFileHeader::kVersion) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path + ": not a version-1 KNNF frames file");
  }
  header_.dim = in.U32("dim");
  header_.vocab = in.U32("vocab");
  uint8_t kind = in.U8("value_kind");
  if (kind > 1) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path + ": unknown value_kind " + std::to_string(kind));
  }
  header_.value_kind = static_cast<ValueKind>(kind);
  if (header_.dim == 0 || header_.vocab < 2) {
    throw Error(ErrorCode::kCorruptFile,
                path + ": header needs dim > 0 and vocab > 1");
  }
}

FramesReader::~FramesReader() = default;

std::optional<UtteranceFrames> FramesReader::Next() {
  auto &in = impl_->in;
  if (in.AtEnd()) return std::nullopt;
  UtteranceFrames utt;
  utt.utt_id = in.String("utterance id");
  const uint64_t t = in.U32("frame count");
  const uint64_t floats = t * (header_.dim + uint64_t{header_.vocab});
  in.Require(floats * sizeof(float), "frame data");
  utt.embeddings = Matrix<float>(t, header_.dim);
  utt.posteriors = Matrix<float>(t, header_.vocab);
  in.F32s(utt.embeddings.data(), "embeddings");
  in.F32s(utt.posteriors.data(), "posteriors");
  if (header_.value_kind == ValueKind::kLogits) {
    utt.posteriors = NormalizePosteriors(utt.posteriors);
  } else {
    ValidateUtterance(utt);
  }
  return utt;
}

std::vector<UtteranceFrames> ReadAllFrames(const std::string &path,
                                           FramesFileHeader *header) {
  FramesReader reader(path);
  if (header) *header = reader.header();
  std::vector<UtteranceFrames> out;
  while (auto utt = reader.Next()) out.push_back(std::move(*utt));
  return out;
}

std::vector<ManifestEntry> ReadManifest(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open manifest " + path);
  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry e;
    try {
      auto j = nlohmann::json::parse(line);
      e.utt_id = j.at("utt_id").get<std::string>();
      e.text = j.value("text", std::string());
    } catch (const nlohmann::json::exception &ex) {
      throw Error(ErrorCode::kCorruptFile,
                  path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    if (!seen.insert(e.utt_id).second) {
      throw Error(ErrorCode::kDuplicateUttId,
                  path + ": utt_id '" + e.utt_id + "' appears twice");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string ManifestLine(const ManifestEntry &entry) {
  nlohmann::ordered_json j;
  j["utt_id"] = entry.utt_id;
  j["text"] = entry.text;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void WriteManifest(const std::string &path,
                   std::span<const ManifestEntry> entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  for (const auto &e : entries) os << ManifestLine(e) << '\n';
  if (!os) throw Error(ErrorCode::kIo, "write to " + path + " failed");
}

}  // namespace knnctc
