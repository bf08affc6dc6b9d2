// src/commands.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/commands.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "knnctc/ann_index.h"
#include "knnctc/frames_io.h"

namespace knnctc {

namespace {

constexpr std::size_t kBatchPerThread = 32;

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
// thrown by any worker is rethrown on the caller.
void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)> &fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i != n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w != threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto &w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

void CheckVocab(const Vocabulary &vocab, uint32_t expected, const char *what) {
  if (vocab.size() != expected) {
    throw Error(ErrorCode::kDimMismatch,
                "vocabulary has " + std::to_string(vocab.size()) +
                    " tokens but the " + what + " has " +
                    std::to_string(expected));
  }
}

BuildReport BuildFromFrames(const std::string &frames_path,
                            const std::string &vocab_path,
                            const std::string &out, bool skip_blank,
                            uint32_t blank_id, std::string tag,
                            std::ostream &log) {
  const Vocabulary vocab = LoadVocabulary(vocab_path, blank_id);
  FramesReader reader(frames_path);
  CheckVocab(vocab, reader.header().vocab, "frames file");
  DatastoreBuilder builder(reader.header().dim, reader.header().vocab, blank_id,
                           skip_blank, std::move(tag));
  BuildReport report;
  while (auto utt = reader.Next()) {
    builder.Add(*utt);
    ++report.utterances;
  }
  Datastore ds = std::move(builder).Finish();
  SaveDatastore(out, ds);
  report.stats = ComputeStats(ds);
  if (ds.source_frames == 0) {
    log << "warning: " << frames_path << " contains no frames; wrote an empty "
        << "datastore\n";
  }
  log << "datastore " << out << ": count=" << report.stats.count
      << " bytes=" << report.stats.bytes
      << " blank_fraction=" << report.stats.blank_fraction_of_source
      << " pruned=" << (ds.pruned ? "yes" : "no") << '\n';
  return report;
}

// Owns the datastore and whichever index the options select.
class SearchContext {
 public:
  SearchContext(const DecodeOptions &opts, std::ostream &log)
      : ds_(LoadDatastore(opts.datastore)) {
    if (opts.index == IndexKind::kIvf && ds_.size() > 0) {
      if (!opts.ivf_path.empty()) {
        ivf_ = LoadIvf(opts.ivf_path);
      } else {
        const std::size_t c = opts.n_centroids
                                  ? opts.n_centroids
                                  : DefaultCentroidCount(ds_.size());
        ivf_ = TrainIvf(ds_, c, opts.kmeans_iters, opts.seed);
      }
      searcher_ = std::make_unique<IvfSearcher>(ivf_, ds_, opts.nprobe);
      log << "ivf index: " << ivf_.n_centroids() << " lists, nprobe="
          << static_cast<const IvfSearcher &>(*searcher_).nprobe() << '\n';
    } else {
      if (opts.index == IndexKind::kIvf) {
        log << "warning: datastore is empty; using flat search\n";
      }
      searcher_ = std::make_unique<FlatSearcher>(ds_);
    }
    if (ds_.size() == 0) {
      log << "warning: datastore " << opts.datastore
          << " is empty; decoding falls back to CTC posteriors\n";
    }
  }

  SearchContext(const SearchContext &) = delete;
  SearchContext &operator=(const SearchContext &) = delete;

  const Datastore &datastore() const { return ds_; }
  const Searcher &searcher() const { return *searcher_; }

 private:
  Datastore ds_;
  IvfIndex ivf_;
  std::unique_ptr<Searcher> searcher_;
};

struct DecodeInputs {
  Vocabulary vocab;
  SearchContext search;
  FramesReader reader;
};

std::unique_ptr<DecodeInputs> OpenDecodeInputs(const DecodeOptions &opts,
                                               std::ostream &log) {
  opts.fusion.Validate();
  auto in = std::unique_ptr<DecodeInputs>(
      new DecodeInputs{LoadVocabulary(opts.vocab, opts.fusion.blank_id),
                       SearchContext(opts, log), FramesReader(opts.frames)});
  CheckVocab(in->vocab, in->reader.header().vocab, "frames file");
  const Datastore &ds = in->search.datastore();
  if (ds.size() > 0 || ds.vocab != 0) {
    CheckVocab(in->vocab, ds.vocab, "datastore");
  }
  if (ds.size() > 0 && ds.dim != in->reader.header().dim) {
    throw Error(ErrorCode::kDimMismatch,
                "frames dim " + std::to_string(in->reader.header().dim) +
                    " != datastore dim " + std::to_string(ds.dim));
  }
  return in;
}

// Reads up to `n` utterances.
std::vector<UtteranceFrames> NextBatch(FramesReader &reader, std::size_t n) {
  std::vector<UtteranceFrames> batch;
  while (batch.size() < n) {
    auto utt = reader.Next();
    if (!utt) break;
    batch.push_back(std::move(*utt));
  }
  return batch;
}

void WriteTrace(std::ostream &os, const std::string &utt_id,
                const DecodeResult &r) {
  for (std::size_t t = 0; t != r.frames.size(); ++t) {
    const auto &f = r.frames[t];
    nlohmann::ordered_json j;
    j["utt_id"] = utt_id;
    j["frame"] = t;
    j["ctc_argmax"] = Argmax(f.p_ctc);
    if (f.p_knn) {
      j["knn_top1"] = Argmax(*f.p_knn);
    } else {
      j["knn_top1"] = nullptr;
    }
    j["fused_argmax"] = f.token_id;
    j["skipped"] = f.skipped;
    os << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
       << '\n';
  }
}

std::string FormatLambda(double lambda) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", lambda);
  return buf;
}

}  // namespace

int ExitCodeFor(const Error &e) {
  return e.code() == ErrorCode::kUsage ? 1 : 2;
}

BuildReport RunBuild(const BuildOptions &opts, std::ostream &log) {
  std::string tag =
      opts.source_tag.empty() ? "build:" + opts.frames : opts.source_tag;
  return BuildFromFrames(opts.frames, opts.vocab, opts.out, opts.skip_blank,
                         opts.blank_id, std::move(tag), log);
}

BuildReport RunAdapt(const AdaptOptions &opts, std::ostream &log) {
  if (!opts.manifest.empty()) {
    throw Error(ErrorCode::kUsage,
                "adapt builds from unlabeled frames only; remove the manifest "
                "argument");
  }
  return BuildFromFrames(opts.frames, opts.vocab, opts.out, opts.skip_blank,
                         opts.blank_id, "adapt:" + opts.frames, log);
}

IvfIndex RunIndex(const IndexOptions &opts, std::ostream &log) {
  const Datastore ds = LoadDatastore(opts.datastore);
  const std::size_t c =
      opts.n_centroids ? opts.n_centroids : DefaultCentroidCount(ds.size());
  IvfIndex index = TrainIvf(ds, c, opts.max_iters, opts.seed);
  SaveIvf(opts.out, index);
  log << "ivf index " << opts.out << ": " << index.n_centroids()
      << " lists over " << ds.size() << " entries, default nprobe "
      << index.default_nprobe << '\n';
  return index;
}

IndexKind ParseIndexKind(const std::string &name) {
  if (name == "flat") return IndexKind::kFlat;
  if (name == "ivf") return IndexKind::kIvf;
  throw Error(ErrorCode::kUsage, "index must be 'flat' or 'ivf'");
}

DecodeReport RunDecode(const DecodeOptions &opts, std::ostream &log) {
  auto in = OpenDecodeInputs(opts, log);
  std::ofstream out(opts.out, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + opts.out);
  std::ofstream trace;
  if (!opts.trace.empty()) {
    trace.open(opts.trace, std::ios::binary | std::ios::trunc);
    if (!trace) throw Error(ErrorCode::kIo, "cannot open " + opts.trace);
  }

  const std::size_t threads = std::max<std::size_t>(1, opts.threads);
  DecodeReport report;
  for (;;) {
    auto batch = NextBatch(in->reader, threads * kBatchPerThread);
    if (batch.empty()) break;
    std::vector<DecodeResult> results(batch.size());
    ParallelFor(batch.size(), threads, [&](std::size_t i) {
      results[i] =
          DecodeUtterance(batch[i], in->search.searcher(), opts.fusion);
    });
    for (std::size_t i = 0; i != batch.size(); ++i) {
      out << ManifestLine(
                 {batch[i].utt_id,
                  Detokenize(in->vocab, results[i].token_ids, opts.joiner)})
          << '\n';
      if (trace.is_open()) WriteTrace(trace, batch[i].utt_id, results[i]);
      report.stats += results[i].stats;
    }
    report.utterances += batch.size();
  }
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "write to " + opts.out + " failed");
  if (report.stats.empty_retrievals > 0) {
    log << "warning: " << report.stats.empty_retrievals
        << " frames had no neighbors and used CTC posteriors only\n";
  }
  log << "decoded " << report.utterances << " utterances, "
      << report.stats.frames << " frames, " << report.stats.queries
      << " retrieval queries, " << report.stats.skipped_frames
      << " frames bypassed\n";
  return report;
}

EvalReport RunEval(const EvalOptions &opts, std::ostream &log) {
  const auto refs = ReadManifest(opts.ref);
  const auto hyps = ReadManifest(opts.hyp);
  std::unordered_map<std::string, const std::string *> hyp_text;
  for (const auto &h : hyps) hyp_text[h.utt_id] = &h.text;

  EvalReport report;
  std::vector<TokenPair> pairs;
  pairs.reserve(refs.size());
  std::unordered_set<std::string> ref_ids;
  for (const auto &r : refs) {
    ref_ids.insert(r.utt_id);
    auto it = hyp_text.find(r.utt_id);
    if (it == hyp_text.end()) {
      log << "warning: no hypothesis for " << r.utt_id
          << "; scored as full deletion\n";
      ++report.missing_hyps;
      pairs.emplace_back(Tokenize(r.text, opts.unit),
                         std::vector<std::string>{});
    } else {
      pairs.emplace_back(Tokenize(r.text, opts.unit),
                         Tokenize(*it->second, opts.unit));
    }
  }
  for (const auto &h : hyps) {
    if (!ref_ids.count(h.utt_id)) {
      log << "warning: hypothesis " << h.utt_id << " has no reference\n";
      ++report.extra_hyps;
    }
  }
  report.result = CorpusErrorRate(pairs);
  if (!opts.json_out.empty()) {
    std::ofstream os(opts.json_out, std::ios::trunc);
    if (!os) throw Error(ErrorCode::kIo, "cannot open " + opts.json_out);
    os << ToJson(report.result) << '\n';
  }
  return report;
}

std::vector<double> ParseLambdaGrid(const std::string &spec) {
  auto parse = [&](const std::string &s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::kUsage, "bad lambda value '" + s + "'");
    }
    return v;
  };
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) {
      throw Error(ErrorCode::kUsage, "lambda range must be start:stop:step");
    }
    const double start = parse(parts[0]);
    const double stop = parse(parts[1]);
    const double step = parse(parts[2]);
    if (!(step > 0) || stop < start) {
      throw Error(ErrorCode::kUsage,
                  "lambda range needs step > 0, stop >= start");
    }
    const auto n =
        static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) {
      // Snap to the step grid so 0:1:0.1 yields 0.3 rather than
      // 0.30000000000000004.
      double v = start + static_cast<double>(i) * step;
      v = std::round(v * 1e12) / 1e12;
      out.push_back(std::min(v, stop));
    }
  } else {
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(parse(p));
  }
  if (out.empty()) throw Error(ErrorCode::kUsage, "empty lambda grid");
  for (double v : out) {
    if (v < 0 || v > 1) {
      throw Error(ErrorCode::kUsage,
                  "lambda " + FormatLambda(v) + " outside [0, 1]");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<SweepRow> RunSweep(const SweepOptions &opts, std::ostream &log) {
  if (opts.lambdas.empty()) throw Error(ErrorCode::kUsage, "no lambdas given");
  std::vector<double> lambdas = opts.lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());

  const auto refs = ReadManifest(opts.manifest);
  std::unordered_map<std::string, std::vector<std::string>> ref_tokens;
  for (const auto &r : refs) ref_tokens[r.utt_id] = Tokenize(r.text, opts.unit);

  auto in = OpenDecodeInputs(opts.decode, log);
  const FusionConfig &cfg = opts.decode.fusion;
  const std::size_t threads = std::max<std::size_t>(1, opts.decode.threads);

  std::vector<ErrorCounts> totals(lambdas.size());
  std::unordered_set<std::string> decoded;
  for (;;) {
    auto batch = NextBatch(in->reader, threads * kBatchPerThread);
    if (batch.empty()) break;
    std::vector<std::vector<ErrorCounts>> counts(batch.size());
    ParallelFor(batch.size(), threads, [&](std::size_t i) {
      auto it = ref_tokens.find(batch[i].utt_id);
      if (it == ref_tokens.end()) return;
      const auto dists =
          ComputeFrameDistributions(batch[i], in->search.searcher(), cfg);
      counts[i].reserve(lambdas.size());
      for (double lambda : lambdas) {
        const auto r = FuseFrames(dists, lambda, cfg.blank_id);
        const auto hyp = Tokenize(
            Detokenize(in->vocab, r.token_ids, opts.decode.joiner), opts.unit);
        counts[i].push_back(AlignAndCount(it->second, hyp));
      }
    });
    for (std::size_t i = 0; i != batch.size(); ++i) {
      if (counts[i].empty()) {
        log << "warning: " << batch[i].utt_id << " has no reference; skipped\n";
        continue;
      }
      decoded.insert(batch[i].utt_id);
      for (std::size_t l = 0; l != lambdas.size(); ++l)
        totals[l] += counts[i][l];
    }
  }
  for (const auto &[id, tokens] : ref_tokens) {
    if (decoded.count(id)) continue;
    log << "warning: no frames for " << id << "; scored as full deletion\n";
    const auto missing = AlignAndCount(tokens, {});
    for (auto &t : totals) t += missing;
  }

  std::vector<SweepRow> rows;
  for (std::size_t l = 0; l != lambdas.size(); ++l) {
    SweepRow row;
    row.lambda = lambdas[l];
    row.result.counts = totals[l];
    row.result.rate = totals[l].Rate();
    rows.push_back(row);
  }
  if (!opts.out.empty()) {
    std::ofstream os(opts.out, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::kIo, "cannot open " + opts.out);
    os << SweepCsv(rows);
  }
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow> &rows) {
  std::ostringstream os;
  os << "lambda,rate,S,D,I\n";
  for (const auto &r : rows) {
    char rate[32];
    std::snprintf(rate, sizeof(rate), "%.8f", r.result.rate);
    os << FormatLambda(r.lambda) << ',' << rate << ','
       << r.result.counts.substitutions << ',' << r.result.counts.deletions
       << ',' << r.result.counts.insertions << '\n';
  }
  return os.str();
}

SynthCorpus RunSynth(const SynthOptions &opts, std::ostream &log) {
  SynthCorpus corpus = GenerateCorpus(opts.config);
  WriteSynthCorpus(corpus, opts.prefix);
  log << "synth " << opts.prefix << ": " << corpus.utterances.size()
      << " utterances, " << corpus.total_frames << " frames, "
      << corpus.argmax_blank_frames << " blank-argmax frames, "
      << corpus.corrupted_frames << " corrupted posteriors\n";
  return corpus;
}

}  // namespace knnctc
