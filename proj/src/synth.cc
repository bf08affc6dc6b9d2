// src/synth.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/synth.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"
#include "knnctc/fusion_decoder.h"

namespace knnctc {

namespace {

// Portable uniform/normal draws; the std distributions are
// implementation-defined and would break cross-platform determinism.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t Below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(Uniform() * n));
  }

  double Normal() {
    const double u1 = 1.0 - Uniform();  // (0, 1]
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

std::string EncodeUtf8(uint32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (cp >> 18));
    s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

}  // namespace

void SynthConfig::Validate() const {
  auto fail = [](const std::string &msg) {
    throw Error(ErrorCode::kInvalidConfig, "synth: " + msg);
  };
  if (num_classes < 1 || num_classes > 20000) {
    fail("num_classes must be in [1, 20000]");
  }
  if (dim < 1) fail("dim must be positive");
  if (min_frames > max_frames) fail("min_frames > max_frames");
  if (!(blank_rate >= 0 && blank_rate < 1))
    fail("blank_rate must be in [0, 1)");
  if (!(noise_sigma >= 0)) fail("noise_sigma must be >= 0");
  if (!(posterior_error_rate >= 0 && posterior_error_rate < 1)) {
    fail("posterior_error_rate must be in [0, 1)");
  }
  if (!(posterior_sharpness > 0)) fail("posterior_sharpness must be positive");
  if (!std::isfinite(center_offset)) fail("center_offset must be finite");
}

FramesFileHeader SynthCorpus::header() const {
  FramesFileHeader h;
  h.vocab = static_cast<uint32_t>(vocab.size());
  h.dim = static_cast<uint32_t>(dim);
  h.value_kind = ValueKind::kProbabilities;
  return h;
}

Vocabulary SynthVocabulary(std::size_t num_classes) {
  std::vector<std::string> tokens{"<blank>"};
  for (std::size_t c = 0; c != num_classes; ++c) {
    tokens.push_back(EncodeUtf8(0x4E00 + static_cast<uint32_t>(c)));
  }
  return Vocabulary(std::move(tokens), 0);
}

std::vector<float> ClassCenter(uint32_t label, std::size_t dim,
                               double center_offset) {
  const std::size_t axis = label % dim;
  const std::size_t block = label / dim;
  const double sign = block % 2 == 0 ? 1.0 : -1.0;
  const double scale = std::sqrt(static_cast<double>(dim)) *
                       (1.0 + static_cast<double>(block / 2) / 2.0);
  std::vector<float> c(dim, static_cast<float>(center_offset));
  c[axis] = static_cast<float>(sign * scale + center_offset);
  return c;
}

SynthCorpus GenerateCorpus(const SynthConfig &cfg) {
  cfg.Validate();
  SynthCorpus corpus;
  corpus.vocab = SynthVocabulary(cfg.num_classes);
  corpus.dim = cfg.dim;
  const std::size_t vocab = corpus.vocab.size();
  const std::size_t dim = cfg.dim;

  std::vector<std::vector<float>> centers;
  for (uint32_t l = 0; l != vocab; ++l) {
    centers.push_back(ClassCenter(l, dim, cfg.center_offset));
  }
  // softmax(sharpness * onehot) in closed form.
  const double peak = std::exp(cfg.posterior_sharpness);
  const double denom = peak + static_cast<double>(vocab - 1);
  const float p_peak = static_cast<float>(peak / denom);
  const float p_rest = static_cast<float>(1.0 / denom);

  Rng rng(cfg.seed);
  const int width =
      cfg.num_utts > 1 ? static_cast<int>(std::log10(cfg.num_utts - 1)) + 1 : 1;
  for (std::size_t u = 0; u != cfg.num_utts; ++u) {
    const std::size_t frames =
        cfg.min_frames + rng.Below(cfg.max_frames - cfg.min_frames + 1);
    char id[64];
    std::snprintf(id, sizeof(id), "-%0*zu", std::max(width, 5), u);

    UtteranceFrames utt;
    utt.utt_id = cfg.utt_prefix + id;
    utt.embeddings = Matrix<float>(frames, dim);
    utt.posteriors = Matrix<float>(frames, vocab);
    std::vector<uint32_t> labels(frames);
    for (std::size_t t = 0; t != frames; ++t) {
      const uint32_t label =
          rng.Uniform() < cfg.blank_rate
              ? 0
              : 1 + static_cast<uint32_t>(rng.Below(cfg.num_classes));
      labels[t] = label;
      auto emb = utt.embeddings.Row(t);
      for (std::size_t d = 0; d != dim; ++d) {
        emb[d] = static_cast<float>(centers[label][d] +
                                    cfg.noise_sigma * rng.Normal());
      }
      uint32_t shown = label;
      if (rng.Uniform() < cfg.posterior_error_rate) {
        // Uniform over the vocab - 1 labels other than the true one.
        shown = static_cast<uint32_t>(rng.Below(vocab - 1));
        if (shown >= label) ++shown;
        ++corpus.corrupted_frames;
      }
      auto post = utt.posteriors.Row(t);
      std::fill(post.begin(), post.end(), p_rest);
      post[shown] = p_peak;

      ++corpus.total_frames;
      if (label == 0) ++corpus.true_blank_frames;
      if (shown == 0) ++corpus.argmax_blank_frames;
    }
    corpus.manifest.push_back(
        {utt.utt_id, Detokenize(corpus.vocab, CtcCollapse(labels, 0))});
    corpus.frame_labels.push_back(std::move(labels));
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

void WriteSynthCorpus(const SynthCorpus &corpus, const std::string &prefix) {
  FramesFileHeader header = corpus.header();
  WriteFrames(prefix + ".knnf", header, corpus.utterances);
  WriteManifest(prefix + ".jsonl", corpus.manifest);
  WriteVocabulary(prefix + ".vocab.txt", corpus.vocab);

  std::ofstream os(prefix + ".labels.jsonl",
                   std::ios::binary | std::ios::trunc);
  if (!os)
    throw Error(ErrorCode::kIo, "cannot write " + prefix + ".labels.jsonl");
  for (std::size_t u = 0; u != corpus.utterances.size(); ++u) {
    nlohmann::ordered_json j;
    j["utt_id"] = corpus.utterances[u].utt_id;
    j["labels"] = corpus.frame_labels[u];
    os << j.dump() << '\n';
  }
}

}  // namespace knnctc
