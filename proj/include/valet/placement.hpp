#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "valet/hints.hpp"
#include "valet/kmeans.hpp"
#include "valet/rules.hpp"

namespace valet {

// The placement engine answers one question -- "which stream and lifetime
// group should this file's bytes join?" -- either from an operator-written
// rule set (heuristic) or from an online mini-batch k-means over open-time
// features (learned).  Per stream it also rotates a lifetime-group counter
// so that bytes admitted far apart in time can be told apart inside a
// stream: by bytes written (quantum) and/or by logical time.

struct PlacementConfig {
  enum class Mode { kHeuristic, kLearned };
  Mode mode = Mode::kHeuristic;

  RuleSet rules;  // heuristic mode

  uint32_t k = 4;           // learned: cluster count (stream budget)
  uint32_t batch_size = 4;  // learned: mini-batch size
  uint64_t seed = 0x76616c6574ULL;

  // Group rotation: advance after this many bytes per stream (0 = off) and
  // after this many ticks of the logical clock (0 = off).
  uint64_t group_quantum_bytes = 256 * 1024;
  uint64_t group_quantum_ticks = 0;
};

class PlacementEngine {
 public:
  explicit PlacementEngine(PlacementConfig cfg);

  // Classifies the open and pairs the stream with its current group.
  Hint hint_for_open(const FileMeta& meta);

  // Classification only (no group pairing, no rotation side effects beyond
  // learned-model updates).
  StreamId classify(const FileMeta& meta);

  // Group to tag an extent with at flush time.
  GroupId group_for_flush(StreamId s);

  GroupId current_group(StreamId s) const;

  // Rotation ledger: logical bytes written to a stream.  A single call may
  // advance the group several times; the remainder carries over.
  void note_stream_bytes(StreamId s, uint64_t n);

  // Logical clock, advanced once per replayed operation.
  void tick() { ++clock_; }
  uint64_t now() const { return clock_; }

  bool learned() const { return cfg_.mode == PlacementConfig::Mode::kLearned; }
  const PlacementConfig& config() const { return cfg_; }
  const MiniBatchKmeans* model() const { return model_ ? &*model_ : nullptr; }

  nlohmann::json state_json() const;
  void restore_state(const nlohmann::json& j);

 private:
  struct StreamGroup {
    GroupId group = 0;
    uint64_t bytes = 0;      // bytes since the last rotation
    uint64_t last_tick = 0;  // clock at the last rotation
  };

  StreamGroup& slot(StreamId s);
  void maybe_rotate_time(StreamGroup& g);

  PlacementConfig cfg_;
  std::map<StreamId, StreamGroup> groups_;
  std::optional<MiniBatchKmeans> model_;
  std::vector<FeatureVec> pending_;
  uint64_t clock_ = 0;
};

}  // namespace valet
