// tests/oracles.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used only by tests. They share no code with the
// library paths they check.

#ifndef KNNCTC_TESTS_ORACLES_H_
#define KNNCTC_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "knnctc/ann_index.h"
#include "knnctc/datastore.h"

namespace knnctc::testing {

// Full sort of every entry by (squared distance, id).
inline NeighborSet BruteForceNeighbors(const Datastore &ds,
                                       const std::vector<float> &query,
                                       std::size_t k, DistanceKind kind) {
  std::vector<std::tuple<double, uint64_t>> all;
  for (uint64_t i = 0; i < ds.keys.rows(); ++i) {
    double s = 0;
    for (std::size_t d = 0; d < query.size(); ++d) {
      const double diff = double(ds.keys(i, d)) - double(query[d]);
      s += diff * diff;
    }
    all.emplace_back(s, i);
  }
  std::sort(all.begin(), all.end());
  NeighborSet out;
  for (std::size_t r = 0; r < all.size() && r < k; ++r) {
    const auto [sq, id] = all[r];
    out.push_back(
        {id, kind == DistanceKind::kL2 ? std::sqrt(sq) : sq, ds.values[id]});
  }
  return out;
}

// Top-down memoized Levenshtein distance.
inline std::size_t EditDistanceOracle(const std::vector<std::string> &a,
                                      const std::vector<std::string> &b) {
  std::vector<std::vector<int>> memo(a.size() + 1,
                                     std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i,
                                                        std::size_t j) {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int &m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), go(i + 1, j) + 1,
                  go(i, j + 1) + 1});
    return m;
  };
  return static_cast<std::size_t>(go(0, 0));
}

// Random datastore with coordinates on a coarse grid so that exact distance
// ties occur regularly.
inline Datastore RandomDatastore(std::mt19937_64 &rng, std::size_t n,
                                 std::size_t dim, uint32_t vocab) {
  Datastore ds;
  ds.dim = static_cast<uint32_t>(dim);
  ds.vocab = vocab;
  ds.keys = Matrix<float>(n, dim);
  const bool grid = rng() % 2 == 0;
  for (float &v : ds.keys.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = grid ? static_cast<float>(std::floor(u * 4))
             : static_cast<float>(u * 8 - 4);
  }
  ds.values.resize(n);
  for (auto &v : ds.values) v = static_cast<uint32_t>(rng() % vocab);
  ds.source_frames = n;
  return ds;
}

inline std::vector<float> RandomQuery(std::mt19937_64 &rng,
                                      const Datastore &ds) {
  std::vector<float> q(ds.dim);
  if (ds.size() > 0 && rng() % 3 == 0) {
    auto key = ds.Key(rng() % ds.size());  // exact hit, distance 0
    q.assign(key.begin(), key.end());
    return q;
  }
  for (float &v : q) {
    v = static_cast<float>(
        std::floor(static_cast<double>(rng() >> 11) * 0x1.0p-53 * 8) / 2 - 2);
  }
  return q;
}

}  // namespace knnctc::testing

#endif  // KNNCTC_TESTS_ORACLES_H_
