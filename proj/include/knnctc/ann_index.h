// knnctc/ann_index.h
//
// Copyright (c)  2026  knnctc authors
// SPDX-License-Identifier: Apache-2.0
//
// k-nearest-neighbor search over datastore keys: an exact flat scan and an
// IVF (inverted file) index with a k-means coarse quantizer. With every list
// probed, IVF search returns exactly what the flat scan returns, including
// the order of tied entries.
//
// Results are sorted by (distance, entry_id) ascending everywhere.

#ifndef KNNCTC_ANN_INDEX_H_
#define KNNCTC_ANN_INDEX_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "knnctc/core.h"
#include "knnctc/datastore.h"

namespace knnctc {

struct Neighbor {
  uint64_t entry_id = 0;
  double distance = 0.0;  // per the requested DistanceKind
  uint32_t value = 0;

  bool operator==(const Neighbor &) const = default;
};

using NeighborSet = std::vector<Neighbor>;

// Accumulated in double over float inputs.
double SquaredL2(std::span<const float> a, std::span<const float> b);

NeighborSet SearchFlat(const Datastore &ds, std::span<const float> query,
                       std::size_t k, DistanceKind kind = DistanceKind::kL2);

struct IvfIndex {
  static constexpr char kMagic[4] = {'K', 'N', 'I', 'V'};
  static constexpr uint32_t kVersion = 1;

  Matrix<float> centroids;                   // C x dim
  std::vector<std::vector<uint64_t>> lists;  // per centroid, ascending ids
  std::size_t default_nprobe = 1;

  std::size_t n_centroids() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
  std::size_t total_entries() const;

  bool operator==(const IvfIndex &) const = default;
};

// round(sqrt(n)), at least 1.
std::size_t DefaultCentroidCount(std::size_t n);
// max(1, n_centroids / 8).
std::size_t DefaultNprobe(std::size_t n_centroids);

// Lloyd's k-means with seeded k-means++ initialization. Stops when no
// centroid moves more than 1e-6 or after max_iters iterations. Throws
// TooManyCentroids when n_centroids exceeds the datastore size.
IvfIndex TrainIvf(const Datastore &ds, std::size_t n_centroids,
                  int max_iters = 25, uint64_t seed = 0);

NeighborSet SearchIvf(const IvfIndex &index, const Datastore &ds,
                      std::span<const float> query, std::size_t k,
                      std::size_t nprobe,
                      DistanceKind kind = DistanceKind::kL2);

// `.knivf`: "KNIV", u32 version, u32 C, u32 D, f32[C*D] centroids,
// u64[C] list lengths, u64[] entry ids (lists concatenated).
void SaveIvf(const std::string &path, const IvfIndex &index);
IvfIndex LoadIvf(const std::string &path);

// Throws DimMismatch/CorruptFile unless every datastore entry appears in
// exactly one list.
void CheckIvfCoversDatastore(const IvfIndex &index, const Datastore &ds);

// Read-only search interface used by the decoder. Implementations are
// immutable after construction and safe to query from many threads.
class Searcher {
 public:
  virtual ~Searcher() = default;
  virtual const Datastore &datastore() const = 0;
  virtual NeighborSet Search(std::span<const float> query, std::size_t k,
                             DistanceKind kind) const = 0;
};

class FlatSearcher : public Searcher {
 public:
  explicit FlatSearcher(const Datastore &ds) : ds_(ds) {}
  const Datastore &datastore() const override { return ds_; }
  NeighborSet Search(std::span<const float> query, std::size_t k,
                     DistanceKind kind) const override {
    return SearchFlat(ds_, query, k, kind);
  }

 private:
  const Datastore &ds_;
};

class IvfSearcher : public Searcher {
 public:
  // nprobe = 0 selects the index default.
  IvfSearcher(const IvfIndex &index, const Datastore &ds,
              std::size_t nprobe = 0);
  const Datastore &datastore() const override { return ds_; }
  NeighborSet Search(std::span<const float> query, std::size_t k,
                     DistanceKind kind) const override {
    return SearchIvf(index_, ds_, query, k, nprobe_, kind);
  }
  std::size_t nprobe() const { return nprobe_; }

 private:
  const IvfIndex &index_;
  const Datastore &ds_;
  std::size_t nprobe_;
};

}  // namespace knnctc

#endif  // KNNCTC_ANN_INDEX_H_
