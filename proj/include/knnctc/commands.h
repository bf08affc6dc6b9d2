// knnctc/commands.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// File-level pipeline steps behind the `knnctc` subcommands. Each Run*
// function reads and writes files, reports progress and warnings to `log`,
// and throws knnctc::Error on failure.

#ifndef KNNCTC_COMMANDS_H_
#define KNNCTC_COMMANDS_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "knnctc/core.h"
#include "knnctc/datastore.h"
#include "knnctc/fusion_decoder.h"
#include "knnctc/metrics.h"
#include "knnctc/synth.h"

namespace knnctc {

// 0 success, 1 usage, 2 data/format error.
int ExitCodeFor(const Error &e);

struct BuildOptions {
  std::string frames;
  std::string vocab;
  std::string out;
  bool skip_blank = false;
  uint32_t blank_id = 0;
  std::string source_tag;  // defaults to "build:<frames>"
};

struct BuildReport {
  DatastoreStats stats;
  std::size_t utterances = 0;
};

BuildReport RunBuild(const BuildOptions &opts, std::ostream &log);

// Datastore construction on unlabeled target-domain frames. Identical to
// RunBuild except that supplying a manifest is a usage error and the source
// tag is "adapt:<frames>".
struct AdaptOptions {
  std::string frames;
  std::string vocab;
  std::string out;
  bool skip_blank = false;
  uint32_t blank_id = 0;
  std::string manifest;  // must stay empty
};

BuildReport RunAdapt(const AdaptOptions &opts, std::ostream &log);

struct IndexOptions {
  std::string datastore;
  std::string out;
  std::size_t n_centroids = 0;  // 0: round(sqrt(N))
  int max_iters = 25;
  uint64_t seed = 0;
};

IvfIndex RunIndex(const IndexOptions &opts, std::ostream &log);

enum class IndexKind { kFlat, kIvf };

IndexKind ParseIndexKind(const std::string &name);

struct DecodeOptions {
  std::string frames;
  std::string datastore;
  std::string vocab;
  std::string out;
  FusionConfig fusion;
  IndexKind index = IndexKind::kFlat;
  std::string ivf_path;         // trained on the fly when empty
  std::size_t n_centroids = 0;  // for on-the-fly training; 0: default
  std::size_t nprobe = 0;       // 0: index default
  int kmeans_iters = 25;
  uint64_t seed = 0;
  std::string trace;  // per-frame JSON lines when non-empty
  std::size_t threads = 1;
  std::string joiner;  // placed between output tokens
};

struct DecodeReport {
  std::size_t utterances = 0;
  DecodeStats stats;
};

DecodeReport RunDecode(const DecodeOptions &opts, std::ostream &log);

struct EvalOptions {
  std::string hyp;
  std::string ref;
  TokenUnit unit = TokenUnit::kChar;
  std::string json_out;  // optional
};

struct EvalReport {
  CorpusResult result;
  std::size_t missing_hyps = 0;  // scored as full deletions
  std::size_t extra_hyps = 0;    // ignored
};

EvalReport RunEval(const EvalOptions &opts, std::ostream &log);

struct SweepOptions {
  DecodeOptions decode;  // out, trace and fusion.lambda are ignored
  std::string manifest;
  std::vector<double> lambdas;
  TokenUnit unit = TokenUnit::kChar;
  std::string out;  // CSV path
};

struct SweepRow {
  double lambda = 0.0;
  CorpusResult result;
};

std::vector<SweepRow> RunSweep(const SweepOptions &opts, std::ostream &log);

// "start:stop:step" (inclusive), a comma list, or a single value; returned
// sorted ascending without duplicates. Throws Usage on malformed input or
// values outside [0, 1].
std::vector<double> ParseLambdaGrid(const std::string &spec);

std::string SweepCsv(const std::vector<SweepRow> &rows);

struct SynthOptions {
  SynthConfig config;
  std::string prefix;
};

SynthCorpus RunSynth(const SynthOptions &opts, std::ostream &log);

}  // namespace knnctc

#endif  // KNNCTC_COMMANDS_H_
