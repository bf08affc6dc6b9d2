// tools/knnctc.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: synth, build, adapt, index, decode, eval, sweep.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "knnctc/ann_index.h"
#include "knnctc/commands.h"

namespace {

void AddFusionOptions(CLI::App *cmd, knnctc::DecodeOptions &o,
                      std::string &index, std::string &distance) {
  cmd->add_option("--frames", o.frames, "Input .knnf frames file")->required();
  cmd->add_option("--datastore", o.datastore, "Input .knds datastore")
      ->required();
  cmd->add_option("--vocab", o.vocab, "Vocabulary file")->required();
  cmd->add_option("--tau", o.fusion.tau, "Softmax temperature over distances");
  cmd->add_option("--k", o.fusion.k, "Neighbors retrieved per frame");
  cmd->add_flag("--skip-blank-decode", o.fusion.skip_blank_decode,
                "Do not query frames whose CTC argmax is blank");
  cmd->add_option("--blank-id", o.fusion.blank_id, "Blank token id");
  cmd->add_option("--distance", distance, "l2 or squared_l2")
      ->check(CLI::IsMember({"l2", "squared_l2"}));
  cmd->add_option("--index", index, "flat or ivf")
      ->check(CLI::IsMember({"flat", "ivf"}));
  cmd->add_option("--ivf", o.ivf_path, "Pre-trained .knivf index");
  cmd->add_option("--nlist", o.n_centroids,
                  "IVF lists when training on the fly (default sqrt(N))");
  cmd->add_option("--nprobe", o.nprobe, "IVF lists probed per query");
  cmd->add_option("--seed", o.seed, "Seed for on-the-fly IVF training");
  cmd->add_option("--threads", o.threads, "Worker threads");
  cmd->add_option("--joiner", o.joiner, "String placed between tokens");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"kNN-augmented CTC decoding toolkit"};
  app.require_subcommand(1);

  knnctc::SynthOptions synth;
  auto *c_synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  c_synth->add_option("--out-prefix", synth.prefix, "Output path prefix")
      ->required();
  c_synth->add_option("--seed", synth.config.seed, "Generator seed");
  c_synth->add_option("--num-utts", synth.config.num_utts, "Utterance count");
  c_synth->add_option("--min-frames", synth.config.min_frames,
                      "Minimum frames per utterance");
  c_synth->add_option("--max-frames", synth.config.max_frames,
                      "Maximum frames per utterance");
  c_synth->add_option("--classes", synth.config.num_classes,
                      "Non-blank classes");
  c_synth->add_option("--dim", synth.config.dim, "Embedding dimension");
  c_synth->add_option("--blank-rate", synth.config.blank_rate,
                      "Probability a frame is blank");
  c_synth->add_option("--noise-sigma", synth.config.noise_sigma,
                      "Embedding noise standard deviation");
  c_synth->add_option("--error-rate", synth.config.posterior_error_rate,
                      "Probability a posterior peaks on a wrong label");
  c_synth->add_option("--sharpness", synth.config.posterior_sharpness,
                      "Posterior logit scale");
  c_synth->add_option("--center-offset", synth.config.center_offset,
                      "Constant shift of every class center");
  c_synth->add_option("--utt-prefix", synth.config.utt_prefix,
                      "Utterance id prefix");

  knnctc::BuildOptions build;
  auto *c_build = app.add_subcommand("build", "Build a datastore");
  c_build->add_option("--frames", build.frames, "Input .knnf frames file")
      ->required();
  c_build->add_option("--vocab", build.vocab, "Vocabulary file")->required();
  c_build->add_option("--out", build.out, "Output .knds datastore")->required();
  c_build->add_flag("--skip-blank", build.skip_blank,
                    "Drop frames whose pseudo label is blank");
  c_build->add_option("--blank-id", build.blank_id, "Blank token id");
  c_build->add_option("--tag", build.source_tag, "Provenance tag");

  knnctc::AdaptOptions adapt;
  auto *c_adapt = app.add_subcommand(
      "adapt", "Build a datastore from unlabeled target-domain frames");
  c_adapt
      ->add_option("--frames", adapt.frames,
                   "Unlabeled target-domain .knnf frames")
      ->required();
  c_adapt->add_option("--vocab", adapt.vocab, "Vocabulary file")->required();
  c_adapt->add_option("--out", adapt.out, "Output .knds datastore")->required();
  c_adapt->add_flag("--skip-blank", adapt.skip_blank,
                    "Drop frames whose pseudo label is blank");
  c_adapt->add_option("--blank-id", adapt.blank_id, "Blank token id");
  c_adapt->add_option("--manifest", adapt.manifest,
                      "Rejected: adaptation uses no transcripts");

  knnctc::IndexOptions index;
  auto *c_index = app.add_subcommand("index", "Train an IVF index");
  c_index->add_option("--datastore", index.datastore, "Input .knds datastore")
      ->required();
  c_index->add_option("--out", index.out, "Output .knivf index")->required();
  c_index->add_option("--nlist", index.n_centroids,
                      "Inverted lists (default sqrt(N))");
  c_index->add_option("--iters", index.max_iters, "Maximum k-means iterations");
  c_index->add_option("--seed", index.seed, "k-means seed");

  knnctc::DecodeOptions decode;
  std::string decode_index = "flat";
  std::string decode_distance = "l2";
  auto *c_decode = app.add_subcommand("decode", "kNN-CTC greedy decoding");
  AddFusionOptions(c_decode, decode, decode_index, decode_distance);
  c_decode->add_option("--out", decode.out, "Hypotheses .jsonl")->required();
  c_decode->add_option("--lambda", decode.fusion.lambda, "kNN weight");
  c_decode->add_option("--trace", decode.trace, "Per-frame trace .jsonl");

  knnctc::EvalOptions eval;
  std::string eval_unit = "char";
  auto *c_eval = app.add_subcommand("eval", "Score hypotheses");
  c_eval->add_option("--hyp", eval.hyp, "Hypotheses .jsonl")->required();
  c_eval->add_option("--ref", eval.ref, "References .jsonl")->required();
  c_eval->add_option("--unit", eval_unit, "char or word")
      ->check(CLI::IsMember({"char", "word"}));
  c_eval->add_option("--json", eval.json_out, "Write the report as JSON");

  knnctc::SweepOptions sweep;
  std::string sweep_index = "flat";
  std::string sweep_distance = "l2";
  std::string sweep_lambdas = "0:1:0.1";
  std::string sweep_unit = "char";
  auto *c_sweep = app.add_subcommand("sweep", "Error rate over a lambda grid");
  AddFusionOptions(c_sweep, sweep.decode, sweep_index, sweep_distance);
  c_sweep->add_option("--manifest", sweep.manifest, "References .jsonl")
      ->required();
  c_sweep->add_option("--lambdas", sweep_lambdas, "start:stop:step or a,b,c");
  c_sweep->add_option("--unit", sweep_unit, "char or word")
      ->check(CLI::IsMember({"char", "word"}));
  c_sweep->add_option("--out", sweep.out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (c_synth->parsed()) {
      knnctc::RunSynth(synth, std::cerr);
    } else if (c_build->parsed()) {
      const auto r = knnctc::RunBuild(build, std::cerr);
      std::cout << "count " << r.stats.count << "\nbytes " << r.stats.bytes
                << "\nblank_fraction " << r.stats.blank_fraction_of_source
                << '\n';
    } else if (c_adapt->parsed()) {
      const auto r = knnctc::RunAdapt(adapt, std::cerr);
      std::cout << "count " << r.stats.count << "\nbytes " << r.stats.bytes
                << "\nblank_fraction " << r.stats.blank_fraction_of_source
                << '\n';
    } else if (c_index->parsed()) {
      knnctc::RunIndex(index, std::cerr);
    } else if (c_decode->parsed()) {
      decode.index = knnctc::ParseIndexKind(decode_index);
      decode.fusion.distance_kind = knnctc::ParseDistanceKind(decode_distance);
      knnctc::RunDecode(decode, std::cerr);
    } else if (c_eval->parsed()) {
      eval.unit = knnctc::ParseTokenUnit(eval_unit);
      const auto r = knnctc::RunEval(eval, std::cerr);
      std::cout << knnctc::FormatReport(r.result, eval.unit) << '\n'
                << knnctc::ToJson(r.result) << '\n';
    } else if (c_sweep->parsed()) {
      sweep.decode.index = knnctc::ParseIndexKind(sweep_index);
      sweep.decode.fusion.distance_kind =
          knnctc::ParseDistanceKind(sweep_distance);
      sweep.lambdas = knnctc::ParseLambdaGrid(sweep_lambdas);
      sweep.unit = knnctc::ParseTokenUnit(sweep_unit);
      const auto rows = knnctc::RunSweep(sweep, std::cerr);
      if (sweep.out.empty()) std::cout << knnctc::SweepCsv(rows);
    }
  } catch (const knnctc::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return knnctc::ExitCodeFor(e);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
