// src/ann_index.cc
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0

#include "knnctc/ann_index.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "binary_io.h"

namespace knnctc {

namespace {

// (squared distance, entry id); ordering defines the neighbor ranking.
using Candidate = std::pair<double, uint64_t>;

void CheckQueryDim(std::size_t query_dim, std::size_t dim) {
  if (query_dim != dim) {
    throw Error(ErrorCode::kDimMismatch,
                "query has " + std::to_string(query_dim) +
                    " dims, datastore has " + std::to_string(dim));
  }
}

NeighborSet TopK(std::vector<Candidate> &candidates, std::size_t k,
                 const Datastore &ds, DistanceKind kind) {
  const std::size_t n = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + n,
                    candidates.end());
  NeighborSet out(n);
  for (std::size_t i = 0; i != n; ++i) {
    const auto [sq, id] = candidates[i];
    out[i].entry_id = id;
    out[i].distance = kind == DistanceKind::kL2 ? std::sqrt(sq) : sq;
    out[i].value = ds.values[id];
  }
  return out;
}

// 53-bit uniform double in [0, 1) from mt19937_64, identical on every
// platform (std::uniform_real_distribution is not).
double Uniform01(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t NearestCentroid(const Matrix<float> &centroids,
                            std::span<const float> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c != centroids.rows(); ++c) {
    const double d = SquaredL2(centroids.Row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Matrix<float> KMeansPlusPlus(const Datastore &ds, std::size_t n_centroids,
                             std::mt19937_64 &rng) {
  const std::size_t n = ds.size();
  Matrix<float> centroids(0, ds.dim);
  centroids.Reserve(n_centroids);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());

  std::size_t pick = static_cast<std::size_t>(Uniform01(rng) * n);
  for (std::size_t c = 0; c != n_centroids; ++c) {
    centroids.AppendRow(ds.Key(pick));
    double total = 0;
    for (std::size_t i = 0; i != n; ++i) {
      min_d[i] = std::min(min_d[i], SquaredL2(ds.Key(i), ds.Key(pick)));
      total += min_d[i];
    }
    if (c + 1 == n_centroids) break;
    if (total > 0) {
      double r = Uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i != n; ++i) {
        r -= min_d[i];
        if (r < 0 && min_d[i] > 0) {
          pick = i;
          break;
        }
      }
      // Guard against rounding landing on an already-covered point.
      while (min_d[pick] == 0 && pick > 0) --pick;
    } else {
      // All remaining points coincide with a chosen centroid.
      pick = static_cast<std::size_t>(Uniform01(rng) * n);
    }
  }
  return centroids;
}

}  // namespace

double SquaredL2(std::span<const float> a, std::span<const float> b) {
  double sum = 0;
  for (std::size_t i = 0; i != a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum;
}

NeighborSet SearchFlat(const Datastore &ds, std::span<const float> query,
                       std::size_t k, DistanceKind kind) {
  CheckQueryDim(query.size(), ds.dim);
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
  std::vector<Candidate> candidates(ds.size());
  for (std::size_t i = 0; i != ds.size(); ++i) {
    candidates[i] = {SquaredL2(ds.Key(i), query), i};
  }
  return TopK(candidates, k, ds, kind);
}

std::size_t IvfIndex::total_entries() const {
  std::size_t n = 0;
  for (const auto &l : lists) n += l.size();
  return n;
}

std::size_t DefaultCentroidCount(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                      std::sqrt(static_cast<double>(n)))));
}

std::size_t DefaultNprobe(std::size_t n_centroids) {
  return std::max<std::size_t>(1, n_centroids / 8);
}

IvfIndex TrainIvf(const Datastore &ds, std::size_t n_centroids, int max_iters,
                  uint64_t seed) {
  const std::size_t n = ds.size();
  if (n_centroids < 1) {
    throw Error(ErrorCode::kInvalidConfig, "need at least one centroid");
  }
  if (n_centroids > n) {
    throw Error(ErrorCode::kTooManyCentroids,
                std::to_string(n_centroids) + " centroids requested for " +
                    std::to_string(n) + " entries");
  }
  const std::size_t dim = ds.dim;
  std::mt19937_64 rng(seed);
  Matrix<float> centroids = KMeansPlusPlus(ds, n_centroids, rng);

  std::vector<std::size_t> assign(n);
  std::vector<double> sums(n_centroids * dim);
  std::vector<std::size_t> counts(n_centroids);
  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i != n; ++i) {
      assign[i] = NearestCentroid(centroids, ds.Key(i));
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i != n; ++i) {
      auto key = ds.Key(i);
      double *s = sums.data() + assign[i] * dim;
      for (std::size_t d = 0; d != dim; ++d) s[d] += key[d];
      ++counts[assign[i]];
    }
    double max_shift = 0;
    for (std::size_t c = 0; c != n_centroids; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      auto row = centroids.Row(c);
      double shift = 0;
      for (std::size_t d = 0; d != dim; ++d) {
        const float updated = static_cast<float>(sums[c * dim + d] / counts[c]);
        const double delta = static_cast<double>(updated) - row[d];
        shift += delta * delta;
        row[d] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    if (max_shift < 1e-6) break;
  }

  IvfIndex index;
  index.lists.resize(n_centroids);
  for (std::size_t i = 0; i != n; ++i) {
    index.lists[NearestCentroid(centroids, ds.Key(i))].push_back(i);
  }
  index.centroids = std::move(centroids);
  index.default_nprobe = DefaultNprobe(n_centroids);
  return index;
}

NeighborSet SearchIvf(const IvfIndex &index, const Datastore &ds,
                      std::span<const float> query, std::size_t k,
                      std::size_t nprobe, DistanceKind kind) {
  CheckQueryDim(query.size(), ds.dim);
  CheckQueryDim(index.dim(), ds.dim);
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "k must be at least 1");
  if (nprobe < 1 || nprobe > index.n_centroids()) {
    throw Error(ErrorCode::kInvalidConfig,
                "nprobe must be in [1, " + std::to_string(index.n_centroids()) +
                    "], got " + std::to_string(nprobe));
  }
  std::vector<std::pair<double, std::size_t>> order(index.n_centroids());
  for (std::size_t c = 0; c != order.size(); ++c) {
    order[c] = {SquaredL2(index.centroids.Row(c), query), c};
  }
  std::partial_sort(order.begin(), order.begin() + nprobe, order.end());

  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p != nprobe; ++p) {
    for (uint64_t id : index.lists[order[p].second]) {
      candidates.emplace_back(SquaredL2(ds.Key(id), query), id);
    }
  }
  return TopK(candidates, k, ds, kind);
}

void SaveIvf(const std::string &path, const IvfIndex &index) {
  internal::BinaryWriter out(path);
  out.Bytes(IvfIndex::kMagic, 4);
  out.U32(IvfIndex::kVersion);
  out.U32(static_cast<uint32_t>(index.n_centroids()));
  out.U32(static_cast<uint32_t>(index.dim()));
  out.F32s(index.centroids.data());
  for (const auto &l : index.lists) out.U64(l.size());
  for (const auto &l : index.lists) out.U64s(l);
  out.Close();
}

IvfIndex LoadIvf(const std::string &path) {
  internal::BinaryReader in(path);
  if (in.remaining() < 8) {
    throw Error(ErrorCode::kUnsupportedFormat, path + ": not a KNIV index");
  }
  char magic[4];
  in.Bytes(magic, 4, "magic");
  if (std::memcmp(magic, IvfIndex::kMagic, 4) != 0 ||
      in.U32("version") != IvfIndex::kVersion) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path + ": not a version-1 KNIV index");
  }
  const uint64_t c = in.U32("centroid count");
  const uint64_t d = in.U32("dim");
  in.Require(c * d * 4 + c * 8, "centroids");
  IvfIndex index;
  index.centroids = Matrix<float>(c, d);
  in.F32s(index.centroids.data(), "centroids");
  std::vector<uint64_t> lengths(c);
  for (auto &len : lengths) len = in.U64("list length");
  index.lists.resize(c);
  for (std::size_t i = 0; i != c; ++i) {
    in.Require(lengths[i] * 8, "list entries");
    index.lists[i].resize(lengths[i]);
    for (auto &id : index.lists[i]) id = in.U64("entry id");
  }
  index.default_nprobe = DefaultNprobe(c);
  return index;
}

void CheckIvfCoversDatastore(const IvfIndex &index, const Datastore &ds) {
  if (index.dim() != ds.dim) {
    throw Error(ErrorCode::kDimMismatch,
                "index dim " + std::to_string(index.dim()) +
                    " != datastore dim " + std::to_string(ds.dim));
  }
  std::vector<char> seen(ds.size(), 0);
  for (const auto &l : index.lists) {
    for (uint64_t id : l) {
      if (id >= ds.size() || seen[id]) {
        throw Error(ErrorCode::kCorruptFile,
                    "index entry " + std::to_string(id) +
                        " is out of range or listed twice");
      }
      seen[id] = 1;
    }
  }
  if (index.total_entries() != ds.size()) {
    throw Error(ErrorCode::kCorruptFile,
                "index covers " + std::to_string(index.total_entries()) +
                    " of " + std::to_string(ds.size()) + " entries");
  }
}

IvfSearcher::IvfSearcher(const IvfIndex &index, const Datastore &ds,
                         std::size_t nprobe)
    : index_(index), ds_(ds), nprobe_(nprobe ? nprobe : index.default_nprobe) {
  CheckIvfCoversDatastore(index, ds);
}

}  // namespace knnctc
