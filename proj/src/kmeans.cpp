#include "valet/kmeans.hpp"

#include <algorithm>
#include <cmath>

#include "valet/errors.hpp"
#include "valet/util.hpp"

namespace valet {

FeatureVec featurize(const FileMeta& meta) {
  FeatureVec f{};
  std::string ext = path_extension(meta.path);
  f[0] = double(fnv1a(ext) % 64) / 63.0;
  f[1] = meta.writable() ? 1.0 : 0.0;
  f[2] = meta.append() ? 1.0 : 0.0;
  f[3] = double(std::min<uint32_t>(dir_depth(meta.path), 8)) / 8.0;
  uint64_t sz = meta.size_hint ? meta.size_hint : 4096;
  f[4] = std::clamp(std::log2(double(sz)) / 30.0, 0.0, 1.0);
  return f;
}

double sq_dist(const FeatureVec& a, const FeatureVec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

MiniBatchKmeans::MiniBatchKmeans(uint32_t k, uint64_t seed) : k_(k), rng_(seed) {
  if (k == 0) throw_errc(Errc::invalid_config, "k must be positive");
}

double MiniBatchKmeans::next_uniform() {
  return double(splitmix64(rng_) >> 11) * 0x1.0p-53;
}

void MiniBatchKmeans::seed_kmeanspp(const std::vector<FeatureVec>& batch) {
  centroids_.clear();
  counts_.assign(k_, 0);

  // First centroid uniform over the batch; the rest D^2-weighted.  A manual
  // cumulative scan keeps the choice bit-stable.
  size_t first = size_t(next_uniform() * double(batch.size()));
  if (first >= batch.size()) first = batch.size() - 1;
  centroids_.push_back(batch[first]);

  std::vector<double> d2(batch.size());
  while (centroids_.size() < k_) {
    double total = 0;
    for (size_t i = 0; i < batch.size(); ++i) {
      double best = sq_dist(batch[i], centroids_[0]);
      for (size_t c = 1; c < centroids_.size(); ++c)
        best = std::min(best, sq_dist(batch[i], centroids_[c]));
      d2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total <= 0) {
      // All points coincide with existing centroids; cycle deterministically.
      pick = centroids_.size() % batch.size();
    } else {
      double r = next_uniform() * total;
      double acc = 0;
      pick = batch.size() - 1;
      for (size_t i = 0; i < batch.size(); ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    }
    centroids_.push_back(batch[pick]);
  }
  initialized_ = true;
}

void MiniBatchKmeans::partial_fit(const std::vector<FeatureVec>& batch) {
  if (batch.empty()) throw_errc(Errc::empty_batch, "partial_fit needs at least one point");
  if (!initialized_) seed_kmeanspp(batch);
  for (const auto& x : batch) {
    uint32_t c = predict(x);
    counts_[c] += 1;
    double eta = 1.0 / double(counts_[c]);
    for (size_t i = 0; i < x.size(); ++i)
      centroids_[c][i] = (1.0 - eta) * centroids_[c][i] + eta * x[i];
  }
}

uint32_t MiniBatchKmeans::predict(const FeatureVec& x) const {
  if (!initialized_)
    throw_errc(Errc::model_uninitialized, "predict before the first partial_fit");
  uint32_t best = 0;
  double bd = sq_dist(x, centroids_[0]);
  for (uint32_t c = 1; c < centroids_.size(); ++c) {
    double d = sq_dist(x, centroids_[c]);
    if (d < bd) {  // strict: ties stay at the lowest index
      bd = d;
      best = c;
    }
  }
  return best;
}

double MiniBatchKmeans::inertia(const std::vector<FeatureVec>& points) const {
  if (points.empty()) return 0;
  double s = 0;
  for (const auto& x : points) s += sq_dist(x, centroids_[predict(x)]);
  return s / double(points.size());
}

nlohmann::json MiniBatchKmeans::state_json() const {
  nlohmann::json j;
  j["k"] = k_;
  j["rng"] = rng_;
  j["initialized"] = initialized_;
  j["counts"] = counts_;
  auto arr = nlohmann::json::array();
  for (const auto& c : centroids_) arr.push_back(std::vector<double>(c.begin(), c.end()));
  j["centroids"] = arr;
  return j;
}

MiniBatchKmeans MiniBatchKmeans::from_json(const nlohmann::json& j) {
  MiniBatchKmeans m(j.at("k").get<uint32_t>(), j.at("rng").get<uint64_t>());
  m.initialized_ = j.at("initialized").get<bool>();
  m.counts_ = j.at("counts").get<std::vector<uint64_t>>();
  for (const auto& cj : j.at("centroids")) {
    auto v = cj.get<std::vector<double>>();
    FeatureVec f{};
    std::copy_n(v.begin(), std::min(v.size(), f.size()), f.begin());
    m.centroids_.push_back(f);
  }
  return m;
}

}  // namespace valet
