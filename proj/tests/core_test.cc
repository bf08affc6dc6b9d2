// tests/core_test.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "knnctc/core.h"
#include "test_util.h"

using namespace knnctc;
using knnctc::testing::TempDir;
using knnctc::testing::WriteLines;

TEST_CASE("LoadVocabulary reads one token per line") {
  TempDir dir;
  const auto path = dir.File("vocab.txt");

  WriteLines(path, {"<blank>", "a", "b"});
  const auto v = LoadVocabulary(path);
  CHECK(v.size() == 3);
  CHECK(v.blank_id() == 0);
  CHECK(v.Token(2) == "b");
  CHECK(v.Find("a") == 1u);
  CHECK_FALSE(v.Find("z").has_value());

  WriteLines(path, {"a", "b", "<blank>"});
  const auto v2 = LoadVocabulary(path, 2);
  CHECK(v2.size() == 3);
  CHECK(v2.blank_id() == 2);
}

TEST_CASE("LoadVocabulary errors") {
  TempDir dir;
  const auto path = dir.File("vocab.txt");

  auto code_of = [&](uint32_t blank) {
    try {
      LoadVocabulary(path, blank);
    } catch (const Error &e) {
      return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::kUsage;
  };

  WriteLines(path, {"<blank>", "a", "a"});
  CHECK(code_of(0) == ErrorCode::kDuplicateToken);

  WriteLines(path, {});
  CHECK(code_of(0) == ErrorCode::kEmptyVocabulary);

  WriteLines(path, {"<blank>", "a"});
  CHECK(code_of(2) == ErrorCode::kBlankOutOfRange);

  CHECK_THROWS_AS(LoadVocabulary(dir.File("missing.txt")), Error);
}

TEST_CASE("Vocabulary write/load round trip") {
  TempDir dir;
  const Vocabulary v({"a", "<blank>", "中", "b c"}, 1);
  WriteVocabulary(dir.File("v.txt"), v);
  CHECK(LoadVocabulary(dir.File("v.txt"), 1) == v);
}

TEST_CASE("Trailing empty lines are not tokens") {
  TempDir dir;
  WriteLines(dir.File("v.txt"), {"<blank>", "a", "", ""});
  CHECK(LoadVocabulary(dir.File("v.txt")).size() == 2);
}

TEST_CASE("NormalizePosteriors examples") {
  Matrix<double> logits(3, 2, {0.0, 0.0, std::log(2.0), 0.0, 1000.0, 0.0});
  const auto p = NormalizePosteriors(logits);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(1, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::isfinite(p(2, 0)));
  CHECK(p(2, 0) == doctest::Approx(1.0));
  CHECK(p(2, 1) < 1e-300);
  for (std::size_t r = 0; r != p.rows(); ++r) {
    CHECK(std::abs(p(r, 0) + p(r, 1) - 1.0) < 1e-6);
  }
}

TEST_CASE("NormalizePosteriors rejects non-finite logits") {
  Matrix<double> nan(1, 2, {std::nan(""), 0.0});
  Matrix<double> inf(1, 2, {INFINITY, 0.0});
  CHECK_THROWS_AS(NormalizePosteriors(nan), Error);
  try {
    NormalizePosteriors(inf);
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kInvalidLogits);
  }
}

TEST_CASE("NormalizePosteriors is shift invariant") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 2 + knnctc::testing::Below(rng, 30);
    Matrix<double> a(1, v), b(1, v);
    const double shift = knnctc::testing::Uniform(rng, -50, 50);
    for (std::size_t c = 0; c != v; ++c) {
      a(0, c) = knnctc::testing::Uniform(rng, -10, 10);
      b(0, c) = a(0, c) + shift;
    }
    const auto pa = NormalizePosteriors(a);
    const auto pb = NormalizePosteriors(b);
    double sum = 0;
    for (std::size_t c = 0; c != v; ++c) {
      CHECK(std::abs(pa(0, c) - pb(0, c)) < 1e-9);
      sum += pa(0, c);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("ValidateUtterance") {
  UtteranceFrames u;
  u.utt_id = "x";
  u.embeddings = Matrix<float>(1, 2, {0, 0});
  u.posteriors = Matrix<float>(1, 2, {0.5f, 0.5f});
  CHECK_NOTHROW(ValidateUtterance(u));

  u.posteriors = Matrix<float>(1, 2, {0.50004f, 0.5f});  // within 1e-4
  CHECK_NOTHROW(ValidateUtterance(u));

  u.posteriors = Matrix<float>(1, 2, {0.6f, 0.5f});
  CHECK_THROWS_AS(ValidateUtterance(u), Error);

  u.posteriors = Matrix<float>(1, 2, {1.1f, -0.1f});
  CHECK_THROWS_AS(ValidateUtterance(u), Error);

  u.posteriors = Matrix<float>(2, 2, {0.5f, 0.5f, 0.5f, 0.5f});
  try {
    ValidateUtterance(u);
    FAIL("expected DimMismatch");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::kDimMismatch);
  }
}

TEST_CASE("FusionConfig defaults and validation") {
  FusionConfig cfg;
  CHECK(cfg.k == 1024);
  CHECK(cfg.tau == 1.0);
  CHECK(cfg.lambda == 0.0);
  CHECK(cfg.blank_id == 0);
  CHECK(cfg.distance_kind == DistanceKind::kL2);
  CHECK_NOTHROW(cfg.Validate());

  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.Validate(), Error);
  cfg.lambda = 0.5;
  cfg.tau = 0;
  CHECK_THROWS_AS(cfg.Validate(), Error);
  cfg.tau = 1;
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.Validate(), Error);
}

TEST_CASE("Matrix AppendRow fixes width") {
  Matrix<float> m;
  const float row[] = {1, 2, 3};
  m.AppendRow(row);
  CHECK(m.rows() == 1);
  CHECK(m.cols() == 3);
  const float bad[] = {1, 2};
  CHECK_THROWS_AS(m.AppendRow(bad), Error);
}
