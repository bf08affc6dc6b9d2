// tests/fusion_decoder_test.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "knnctc/datastore.h"
#include "knnctc/fusion_decoder.h"
#include "oracles.h"
#include "test_util.h"

using namespace knnctc;
using namespace knnctc::testing;

namespace {

double Sum(const std::vector<double> &p) {
  return std::accumulate(p.begin(), p.end(), 0.0);
}

class CountingSearcher : public Searcher {
 public:
  explicit CountingSearcher(const Datastore &ds) : flat_(ds) {}
  const Datastore &datastore() const override { return flat_.datastore(); }
  NeighborSet Search(std::span<const float> q, std::size_t k,
                     DistanceKind kind) const override {
    ++queries;
    return flat_.Search(q, k, kind);
  }
  mutable std::atomic<uint64_t> queries{0};

 private:
  FlatSearcher flat_;
};

Datastore MakeDatastore(const std::vector<std::vector<float>> &keys,
                        const std::vector<uint32_t> &values, uint32_t vocab) {
  Datastore ds;
  ds.dim = static_cast<uint32_t>(keys.front().size());
  ds.vocab = vocab;
  for (const auto &k : keys) ds.keys.AppendRow(k);
  ds.values = values;
  return ds;
}

}  // namespace

TEST_CASE("ComputePknn hand-computed cases") {
  // Single neighbor: one-hot regardless of distance and tau.
  for (double d : {0.0, 3.0, 1e4}) {
    for (double tau : {0.1, 1.0, 50.0}) {
      const auto p = ComputePknn({{0, d, 3}}, tau, 5);
      CHECK(p == std::vector<double>{0, 0, 0, 1, 0});
    }
  }
  // Equal distances split evenly.
  const auto even = ComputePknn({{0, 2.0, 1}, {1, 2.0, 2}}, 1.0, 5);
  CHECK(even == std::vector<double>{0, 0.5, 0.5, 0, 0});
  // Weights exp(0) = 1 and exp(-ln 3) = 1/3 normalize to 0.75 / 0.25.
  const auto p = ComputePknn({{0, 0.0, 1}, {1, std::log(3.0), 2}}, 1.0, 3);
  CHECK(p[0] == 0.0);
  CHECK(std::abs(p[1] - 0.75) < 1e-9);
  CHECK(std::abs(p[2] - 0.25) < 1e-9);
}

TEST_CASE("ComputePknn errors") {
  try {
    ComputePknn({}, 1.0, 3);
    FAIL("expected EmptyRetrieval");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kEmptyRetrieval);
  }
  CHECK_THROWS_AS(ComputePknn({{0, 0.0, 1}}, 0.0, 3), Error);
  CHECK_THROWS_AS(ComputePknn({{0, 0.0, 7}}, 1.0, 3), Error);
}

TEST_CASE("ComputePknn survives large distances") {
  const auto p = ComputePknn({{0, 5000.0, 1}, {1, 5001.0, 2}}, 1.0, 3);
  CHECK(std::isfinite(p[1]));
  CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("ComputePknn is invariant to a common distance shift") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    NeighborSet ns;
    const std::size_t n = 1 + Below(rng, 30);
    for (std::size_t i = 0; i != n; ++i) {
      ns.push_back(
          {i, Uniform(rng, 0, 20), static_cast<uint32_t>(Below(rng, 6))});
    }
    const double c = Uniform(rng, 0, 100);
    NeighborSet shifted = ns;
    for (auto &x : shifted) x.distance += c;
    const double tau = Uniform(rng, 0.1, 10);
    const auto a = ComputePknn(ns, tau, 6);
    const auto b = ComputePknn(shifted, tau, 6);
    for (std::size_t v = 0; v != 6; ++v) CHECK(std::abs(a[v] - b[v]) < 1e-9);
    CHECK(std::abs(Sum(a) - 1.0) < 1e-9);
  }
}

TEST_CASE("Large tau approaches the value histogram") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    NeighborSet ns;
    std::vector<double> hist(5, 0.0);
    const std::size_t n = 1 + Below(rng, 40);
    for (std::size_t i = 0; i != n; ++i) {
      const auto v = static_cast<uint32_t>(Below(rng, 5));
      ns.push_back({i, Uniform(rng, 0, 10), v});
      hist[v] += 1.0 / static_cast<double>(n);
    }
    const auto p = ComputePknn(ns, 1e9, 5);
    for (std::size_t v = 0; v != 5; ++v) CHECK(std::abs(p[v] - hist[v]) < 1e-6);
  }
}

TEST_CASE("Fuse endpoints and interior point") {
  const std::vector<double> knn{1.0, 0.0};
  const std::vector<double> ctc{0.4, 0.6};
  CHECK(Fuse(knn, ctc, 0.0) == ctc);
  CHECK(Fuse(knn, ctc, 1.0) == knn);
  const auto mid = Fuse(knn, ctc, 0.5);
  CHECK(std::abs(mid[0] - 0.7) < 1e-12);
  CHECK(std::abs(mid[1] - 0.3) < 1e-12);
  CHECK(std::abs(Sum(mid) - 1.0) < 1e-9);

  const std::vector<double> three{0.2, 0.3, 0.5};
  try {
    Fuse(knn, three, 0.5);
    FAIL("expected DimMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kDimMismatch);
  }
}

TEST_CASE("CtcCollapse") {
  const uint32_t a = 1, b = 2, blank = 0;
  CHECK(CtcCollapse(std::vector<uint32_t>{a, a, blank, b}, blank) ==
        std::vector<uint32_t>{a, b});
  CHECK(CtcCollapse(std::vector<uint32_t>{blank, blank, blank}, blank).empty());
  CHECK(CtcCollapse(std::vector<uint32_t>{a, blank, a}, blank) ==
        std::vector<uint32_t>{a, a});
  CHECK(CtcCollapse(std::vector<uint32_t>{}, blank).empty());
  // Non-zero blank id.
  CHECK(CtcCollapse(std::vector<uint32_t>{0, 2, 0, 0, 1}, 2) ==
        std::vector<uint32_t>{0, 0, 1});
}

TEST_CASE("Skip-blank decoding keeps a blank frame blank") {
  // V = 2: blank=0, 'a'=1. The only frame is blank-argmax under CTC while
  // every neighbor says 'a'.
  const auto ds = MakeDatastore({{0, 0}, {0, 1}, {1, 0}}, {1, 1, 1}, 2);
  const auto utt = MakeUtterance("u", Matrix<float>(1, 2, {0, 0}),
                                 Matrix<float>(1, 2, {0.6f, 0.4f}));
  CountingSearcher searcher(ds);
  FusionConfig cfg;
  cfg.lambda = 0.9;
  cfg.k = 3;

  cfg.skip_blank_decode = true;
  auto r = DecodeUtterance(utt, searcher, cfg);
  CHECK(r.frames[0].token_id == 0);
  CHECK(r.frames[0].skipped);
  CHECK_FALSE(r.frames[0].p_knn.has_value());
  CHECK(r.token_ids.empty());
  CHECK(searcher.queries == 0);

  // Without the bypass the neighbors win: 0.9 * 1 + 0.1 * 0.4 > 0.1 * 0.6.
  cfg.skip_blank_decode = false;
  r = DecodeUtterance(utt, searcher, cfg);
  CHECK(r.frames[0].token_id == 1);
  CHECK(r.token_ids == std::vector<uint32_t>{1});
  CHECK(searcher.queries == 1);
}

TEST_CASE("Three-frame toy: neighbors flip frame 0 from a to b") {
  // V = 3: blank=0, a=1, b=2. CTC argmaxes are [a, blank, a]. With k = 1
  // each frame retrieves exactly the entry at its own position, so
  // p_knn is one-hot at [b, blank, a]. At lambda = 0.9:
  //   frame 0: b = 0.9 + 0.1*0.3 = 0.93, a = 0.1*0.6 = 0.06      -> b
  //   frame 1: blank = 0.9 + 0.1*0.8 = 0.98                       -> blank
  //   frame 2: a = 0.9 + 0.1*0.8 = 0.98                           -> a
  // Collapsed: "ba".
  const auto ds = MakeDatastore({{0, 0}, {10, 0}, {20, 0}}, {2, 0, 1}, 3);
  const auto utt = MakeUtterance(
      "u", Matrix<float>(3, 2, {0, 0, 10, 0, 20, 0}),
      Matrix<float>(3, 3,
                    {0.1f, 0.6f, 0.3f, 0.8f, 0.1f, 0.1f, 0.1f, 0.8f, 0.1f}));
  FlatSearcher searcher(ds);
  FusionConfig cfg;
  cfg.lambda = 0.9;
  cfg.k = 1;
  const auto r = DecodeUtterance(utt, searcher, cfg);
  CHECK(r.token_ids == std::vector<uint32_t>{2, 1});
  CHECK(r.frames[0].p_fused[2] == doctest::Approx(0.93));
  CHECK(r.frames[0].p_fused[1] == doctest::Approx(0.06));
  CHECK(GreedyCtcDecode(utt.posteriors, 0) == std::vector<uint32_t>{1, 1});
}

TEST_CASE("lambda = 0 reproduces greedy CTC for any datastore") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t dim = 1 + Below(rng, 6);
    const uint32_t vocab = 2 + static_cast<uint32_t>(Below(rng, 6));
    const auto ds = RandomDatastore(rng, Below(rng, 60), dim, vocab);
    const std::size_t t = Below(rng, 25);
    Matrix<float> emb(t, dim);
    for (float &v : emb.data()) v = static_cast<float>(Uniform(rng, -4, 4));
    const auto utt = MakeUtterance("u", std::move(emb),
                                   RandomPosteriors(rng, t, vocab, 3.0));
    FlatSearcher searcher(ds);
    FusionConfig cfg;
    cfg.k = 1 + Below(rng, 20);
    cfg.skip_blank_decode = rng() % 2;
    const auto r = DecodeUtterance(utt, searcher, cfg);
    CHECK(r.token_ids == GreedyCtcDecode(utt.posteriors, 0));
  }
}

TEST_CASE("Every fused row is normalized and the query counter is exact") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = RandomDatastore(rng, 1 + Below(rng, 80), 3, 4);
    const std::size_t t = 1 + Below(rng, 30);
    Matrix<float> emb(t, 3);
    for (float &v : emb.data()) v = static_cast<float>(Uniform(rng, -4, 4));
    const auto utt =
        MakeUtterance("u", std::move(emb), RandomPosteriors(rng, t, 4, 3.0));
    CountingSearcher searcher(ds);
    FusionConfig cfg;
    cfg.lambda = Uniform(rng, 0, 1);
    cfg.k = 1 + Below(rng, 10);
    cfg.skip_blank_decode = true;
    cfg.distance_kind =
        trial % 2 ? DistanceKind::kL2 : DistanceKind::kSquaredL2;
    const auto r = DecodeUtterance(utt, searcher, cfg);
    uint64_t non_blank = 0;
    for (std::size_t f = 0; f != t; ++f) {
      if (Argmax(utt.posteriors.Row(f)) != 0) ++non_blank;
      const auto &d = r.frames[f];
      CHECK(std::abs(Sum(d.p_fused) - 1.0) < 1e-5);
      CHECK(std::abs(Sum(d.p_ctc) - 1.0) < 1e-5);
      if (d.p_knn) CHECK(std::abs(Sum(*d.p_knn) - 1.0) < 1e-5);
      CHECK(d.token_id == Argmax(d.p_fused));
    }
    CHECK(searcher.queries == non_blank);
    CHECK(r.stats.queries == non_blank);
    CHECK(r.stats.skipped_frames == t - non_blank);
  }
}

TEST_CASE("Empty datastore falls back to CTC with a warning count") {
  Datastore ds;
  ds.dim = 2;
  ds.vocab = 3;
  ds.keys = Matrix<float>(0, 2);
  const auto utt =
      MakeUtterance("u", Matrix<float>(2, 2),
                    Matrix<float>(2, 3, {0.2f, 0.7f, 0.1f, 0.6f, 0.2f, 0.2f}));
  FlatSearcher searcher(ds);
  FusionConfig cfg;
  cfg.lambda = 0.8;
  const auto r = DecodeUtterance(utt, searcher, cfg);
  CHECK(r.stats.empty_retrievals == 2);
  CHECK(r.token_ids == std::vector<uint32_t>{1});
  CHECK_FALSE(r.frames[0].p_knn.has_value());
}

TEST_CASE("Decoder rejects mismatched dims") {
  const auto ds = MakeDatastore({{0, 0}}, {1}, 3);
  const auto utt = MakeUtterance("u", Matrix<float>(1, 3),
                                 Matrix<float>(1, 3, {0.2f, 0.7f, 0.1f}));
  FlatSearcher searcher(ds);
  try {
    DecodeUtterance(utt, searcher, FusionConfig{});
    FAIL("expected DimMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kDimMismatch);
  }
}
