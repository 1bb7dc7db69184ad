#include <doctest.h>

#include <map>

#include "valet/errors.hpp"
#include "valet/kmeans.hpp"
#include "valet/util.hpp"

using namespace valet;

namespace {

FileMeta wal_meta(int i) {
  FileMeta m;
  m.path = "wal/" + std::to_string(i) + ".log";
  m.flags = kOfWrite | kOfAppend | kOfCreate;
  m.size_hint = 64 * 1024;
  return m;
}

FileMeta sst_meta(int i) {
  FileMeta m;
  m.path = "sst/" + std::to_string(i) + ".sst";
  m.flags = kOfWrite | kOfCreate;
  m.size_hint = 1 << 20;
  return m;
}

}  // namespace

TEST_CASE("featurize maps everything into the unit cube") {
  for (auto& m : {wal_meta(1), sst_meta(2), FileMeta{"x", kOfRead, 0},
                  FileMeta{"a/b/c/d/e/f/g/h/i/j/verydeep.bin", kOfWrite, 1ull << 40}}) {
    FeatureVec f = featurize(m);
    for (double v : f) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  // depth saturates at 8 directories
  FileMeta deep{"1/2/3/4/5/6/7/8/9/10/f", kOfRead, 0};
  CHECK(featurize(deep)[3] == 1.0);
  FileMeta flat{"f", kOfRead, 0};
  CHECK(featurize(flat)[3] == 0.0);
  // write/append flags surface as distinct components
  CHECK(featurize(wal_meta(0))[1] == 1.0);
  CHECK(featurize(wal_meta(0))[2] == 1.0);
  CHECK(featurize(sst_meta(0))[2] == 0.0);
  // a missing size hint behaves like one block, not like zero
  FileMeta nohint{"x.bin", kOfWrite, 0};
  CHECK(featurize(nohint)[4] == doctest::Approx(12.0 / 30.0));
}

TEST_CASE("model guards: empty batch and early predict") {
  MiniBatchKmeans m(2, 7);
  CHECK(!m.initialized());
  try {
    m.predict(featurize(wal_meta(0)));
    FAIL("expected ModelUninitialized");
  } catch (const ValetError& e) {
    CHECK(e.code() == Errc::model_uninitialized);
  }
  try {
    m.partial_fit({});
    FAIL("expected EmptyBatch");
  } catch (const ValetError& e) {
    CHECK(e.code() == Errc::empty_batch);
  }
}

TEST_CASE("same seed and data give bit-identical centroids") {
  std::vector<FeatureVec> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(featurize(i % 2 ? wal_meta(i) : sst_meta(i)));
  MiniBatchKmeans a(3, 99), b(3, 99);
  a.partial_fit(batch);
  b.partial_fit(batch);
  REQUIRE(a.centroids().size() == b.centroids().size());
  for (size_t i = 0; i < a.centroids().size(); ++i)
    for (size_t d = 0; d < a.centroids()[i].size(); ++d)
      CHECK(a.centroids()[i][d] == b.centroids()[i][d]);
}

TEST_CASE("a batch smaller than k still seeds deterministically") {
  MiniBatchKmeans m(4, 1);
  m.partial_fit({featurize(wal_meta(0)), featurize(sst_meta(0))});
  CHECK(m.initialized());
  CHECK(m.centroids().size() == 4);
  // predictions are still well-defined
  (void)m.predict(featurize(wal_meta(1)));
}

TEST_CASE("two separated classes cluster with high purity") {
  // Interleave two file populations and fit in mini-batches of 4, the same
  // flow the learned classifier uses.  Ground truth comes from the
  // generator, so cluster purity has an external oracle.
  MiniBatchKmeans m(2, 0x5eed);
  std::vector<FeatureVec> batch;
  std::vector<std::pair<FeatureVec, int>> labelled;
  for (int i = 0; i < 400; ++i) {
    FileMeta fm = (i % 2 == 0) ? wal_meta(i) : sst_meta(i);
    FeatureVec f = featurize(fm);
    labelled.push_back({f, i % 2});
    batch.push_back(f);
    if (batch.size() == 4) {
      m.partial_fit(batch);
      batch.clear();
    }
  }
  // majority cluster per class
  std::map<std::pair<int, uint32_t>, int> votes;
  for (auto& [f, cls] : labelled) votes[{cls, m.predict(f)}]++;
  int correct = 0, total = 0;
  for (int cls : {0, 1}) {
    int best = 0, sum = 0;
    for (uint32_t c = 0; c < 2; ++c) {
      int v = votes.count({cls, c}) ? votes[{cls, c}] : 0;
      best = std::max(best, v);
      sum += v;
    }
    correct += best;
    total += sum;
  }
  double purity = double(correct) / double(total);
  CHECK(purity >= 0.99);
  // the two classes land on different centroids
  CHECK(m.predict(featurize(wal_meta(1000))) != m.predict(featurize(sst_meta(1000))));
}

TEST_CASE("per-centroid counts sum to the points consumed") {
  MiniBatchKmeans m(2, 3);
  std::vector<FeatureVec> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(featurize(i % 2 ? wal_meta(i) : sst_meta(i)));
  m.partial_fit(batch);
  uint64_t sum = 0;
  for (auto c : m.counts()) sum += c;
  CHECK(sum == 32);
}

TEST_CASE("state survives a JSON round trip") {
  MiniBatchKmeans m(2, 11);
  std::vector<FeatureVec> batch;
  for (int i = 0; i < 20; ++i) batch.push_back(featurize(i % 2 ? wal_meta(i) : sst_meta(i)));
  m.partial_fit(batch);

  MiniBatchKmeans back = MiniBatchKmeans::from_json(m.state_json());
  CHECK(back.initialized());
  for (int i = 0; i < 10; ++i) {
    CHECK(back.predict(featurize(wal_meta(100 + i))) == m.predict(featurize(wal_meta(100 + i))));
    CHECK(back.predict(featurize(sst_meta(100 + i))) == m.predict(featurize(sst_meta(100 + i))));
  }
}

TEST_CASE("inertia shrinks once the model has seen the data") {
  std::vector<FeatureVec> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(featurize(i % 2 ? wal_meta(i) : sst_meta(i)));
  MiniBatchKmeans m(2, 5);
  m.partial_fit({pts[0], pts[1], pts[2], pts[3]});
  double before = m.inertia(pts);
  for (size_t i = 4; i + 4 <= pts.size(); i += 4)
    m.partial_fit({pts[i], pts[i + 1], pts[i + 2], pts[i + 3]});
  double after = m.inertia(pts);
  CHECK(after <= before + 1e-12);
  CHECK(after < 0.05);  // two tight synthetic clusters
}
