#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "valet/hints.hpp"

namespace valet {

// 5-dimensional feature vector for a file-open event, every component
// normalized into [0,1]:
//   [0] extension hash bucket (FNV-1a mod 64, scaled)
//   [1] write intent
//   [2] append intent
//   [3] directory depth, saturating at 8
//   [4] log2 of the size hint, scaled (missing hint treated as one block)
using FeatureVec = std::array<double, 5>;

FeatureVec featurize(const FileMeta& meta);

// Mini-batch k-means (Sculley-style): centroids update with per-centroid
// learning rate 1/count.  Seeding is k-means++ over the first batch.  All
// randomness comes from an explicit seed through hand-rolled uniform doubles
// so results are bit-stable across standard libraries.
class MiniBatchKmeans {
 public:
  MiniBatchKmeans(uint32_t k, uint64_t seed);

  // Processes one batch.  The first non-empty batch seeds the centroids.
  // Throws EmptyBatch on an empty input.
  void partial_fit(const std::vector<FeatureVec>& batch);

  // Nearest centroid by Euclidean distance, ties to the lowest index.
  // Throws ModelUninitialized before the first partial_fit.
  uint32_t predict(const FeatureVec& x) const;

  bool initialized() const { return initialized_; }
  uint32_t k() const { return k_; }
  const std::vector<FeatureVec>& centroids() const { return centroids_; }
  const std::vector<uint64_t>& counts() const { return counts_; }

  // Mean squared distance of `points` to their assigned centroids.
  double inertia(const std::vector<FeatureVec>& points) const;

  nlohmann::json state_json() const;
  static MiniBatchKmeans from_json(const nlohmann::json& j);

 private:
  void seed_kmeanspp(const std::vector<FeatureVec>& batch);
  double next_uniform();  // [0,1), from rng_

  uint32_t k_;
  uint64_t rng_;  // splitmix64 state
  bool initialized_ = false;
  std::vector<FeatureVec> centroids_;
  std::vector<uint64_t> counts_;
};

double sq_dist(const FeatureVec& a, const FeatureVec& b);

}  // namespace valet
