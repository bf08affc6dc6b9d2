// src/metrics.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/metrics.h"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "knnctc/errors.h"

namespace knnctc {

double ErrorCounts::Rate() const {
  if (ref_len == 0) {
    throw Error(ErrorCode::kUndefinedRate, "reference length is zero");
  }
  return static_cast<double>(errors()) / static_cast<double>(ref_len);
}

ErrorCounts AlignAndCount(std::span<const std::string> ref,
                          std::span<const std::string> hyp) {
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();
  // cell(i, j): (edit distance, fewest deletions + insertions among
  // minimum-cost alignments) for ref[0:i] against hyp[0:j].
  using Cell = std::pair<uint32_t, uint32_t>;
  std::vector<Cell> table((m + 1) * (n + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cell & {
    return table[i * (n + 1) + j];
  };
  auto step = [](Cell c, uint32_t cost, uint32_t indel) {
    return Cell{c.first + cost, c.second + indel};
  };
  for (std::size_t i = 0; i <= m; ++i) {
    at(i, 0) = {static_cast<uint32_t>(i), static_cast<uint32_t>(i)};
  }
  for (std::size_t j = 0; j <= n; ++j) {
    at(0, j) = {static_cast<uint32_t>(j), static_cast<uint32_t>(j)};
  }
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const Cell diag =
          step(at(i - 1, j - 1), ref[i - 1] == hyp[j - 1] ? 0 : 1, 0);
      at(i, j) =
          std::min({diag, step(at(i - 1, j), 1, 1), step(at(i, j - 1), 1, 1)});
    }
  }

  ErrorCounts c;
  c.ref_len = m;
  std::size_t i = m;
  std::size_t j = n;
  while (i > 0 || j > 0) {
    const Cell here = at(i, j);
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        here == at(i - 1, j - 1)) {
      ++c.correct;
      --i;
      --j;
    } else if (i > 0 && j > 0 && here == step(at(i - 1, j - 1), 1, 0)) {
      ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && here == step(at(i - 1, j), 1, 1)) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

TokenUnit ParseTokenUnit(std::string_view name) {
  if (name == "char") return TokenUnit::kChar;
  if (name == "word") return TokenUnit::kWord;
  throw Error(ErrorCode::kUsage,
              "unit must be 'char' or 'word', got '" + std::string(name) + "'");
}

namespace {

bool IsSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Length of the UTF-8 sequence starting at s[0], or 1 if it is malformed.
std::size_t Utf8Length(std::string_view s) {
  const unsigned char c = s[0];
  std::size_t len = c < 0x80           ? 1
                    : (c >> 5) == 0x6  ? 2
                    : (c >> 4) == 0xE  ? 3
                    : (c >> 3) == 0x1E ? 4
                                       : 0;
  if (len == 0 || len > s.size()) return 1;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[k]) >> 6) != 0x2) return 1;
  }
  return len;
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view text, TokenUnit unit) {
  std::vector<std::string> out;
  if (unit == TokenUnit::kWord) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && IsSpace(text[i])) ++i;
      std::size_t start = i;
      while (i < text.size() && !IsSpace(text[i])) ++i;
      if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t len = Utf8Length(text.substr(i));
    if (!(len == 1 && IsSpace(text[i]))) out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

CorpusResult CorpusErrorRate(std::span<const TokenPair> pairs) {
  CorpusResult r;
  for (const auto &[ref, hyp] : pairs) r.counts += AlignAndCount(ref, hyp);
  if (r.counts.ref_len == 0) {
    throw Error(ErrorCode::kUndefinedRate, "all references are empty");
  }
  r.rate = r.counts.Rate();
  return r;
}

std::string ToJson(const CorpusResult &result) {
  nlohmann::ordered_json j;
  j["S"] = result.counts.substitutions;
  j["D"] = result.counts.deletions;
  j["I"] = result.counts.insertions;
  j["C"] = result.counts.correct;
  j["ref_len"] = result.counts.ref_len;
  j["rate"] = result.rate;
  return j.dump();
}

std::string FormatReport(const CorpusResult &result, TokenUnit unit) {
  const auto &c = result.counts;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s %.2f%% [ %llu / %llu, S=%llu D=%llu I=%llu C=%llu ]",
                unit == TokenUnit::kChar ? "CER" : "WER", 100.0 * result.rate,
                static_cast<unsigned long long>(c.errors()),
                static_cast<unsigned long long>(c.ref_len),
                static_cast<unsigned long long>(c.substitutions),
                static_cast<unsigned long long>(c.deletions),
                static_cast<unsigned long long>(c.insertions),
                static_cast<unsigned long long>(c.correct));
  return buf;
}

}  // namespace knnctc
