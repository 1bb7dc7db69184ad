#include "valet/placement.hpp"

#include "valet/errors.hpp"

namespace valet {

PlacementEngine::PlacementEngine(PlacementConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.mode == PlacementConfig::Mode::kLearned) {
    if (cfg_.batch_size == 0) throw_errc(Errc::invalid_config, "batch_size must be positive");
    model_.emplace(cfg_.k, cfg_.seed);
  }
}

PlacementEngine::StreamGroup& PlacementEngine::slot(StreamId s) {
  auto [it, fresh] = groups_.try_emplace(s);
  if (fresh) it->second.last_tick = clock_;
  return it->second;
}

void PlacementEngine::maybe_rotate_time(StreamGroup& g) {
  if (cfg_.group_quantum_ticks == 0) return;
  while (clock_ - g.last_tick >= cfg_.group_quantum_ticks) {
    g.last_tick += cfg_.group_quantum_ticks;
    g.group += 1;
    g.bytes = 0;
  }
}

StreamId PlacementEngine::classify(const FileMeta& meta) {
  if (cfg_.mode == PlacementConfig::Mode::kHeuristic) return cfg_.rules.match(meta);

  // Learned: buffer the observation; fit whenever a mini-batch is ready.
  // Until the first fit the model cannot predict, so opens fall back to
  // stream 0 (the bootstrap default).
  FeatureVec f = featurize(meta);
  pending_.push_back(f);
  if (pending_.size() >= cfg_.batch_size) {
    model_->partial_fit(pending_);
    pending_.clear();
  }
  if (!model_->initialized()) return 0;
  return model_->predict(f);
}

Hint PlacementEngine::hint_for_open(const FileMeta& meta) {
  StreamId s = classify(meta);
  StreamGroup& g = slot(s);
  maybe_rotate_time(g);
  return Hint{s, g.group};
}

GroupId PlacementEngine::group_for_flush(StreamId s) {
  StreamGroup& g = slot(s);
  maybe_rotate_time(g);
  return g.group;
}

GroupId PlacementEngine::current_group(StreamId s) const {
  auto it = groups_.find(s);
  return it == groups_.end() ? 0 : it->second.group;
}

void PlacementEngine::note_stream_bytes(StreamId s, uint64_t n) {
  if (cfg_.group_quantum_bytes == 0) return;
  StreamGroup& g = slot(s);
  g.bytes += n;
  while (g.bytes >= cfg_.group_quantum_bytes) {
    g.bytes -= cfg_.group_quantum_bytes;  // carryover stays
    g.group += 1;
    g.last_tick = clock_;
  }
}

nlohmann::json PlacementEngine::state_json() const {
  nlohmann::json j;
  j["clock"] = clock_;
  nlohmann::json gs = nlohmann::json::object();
  for (const auto& [s, g] : groups_)
    gs[std::to_string(s)] = {{"group", g.group}, {"bytes", g.bytes}, {"last_tick", g.last_tick}};
  j["groups"] = gs;
  if (model_ && model_->initialized()) j["kmeans"] = model_->state_json();
  return j;
}

void PlacementEngine::restore_state(const nlohmann::json& j) {
  groups_.clear();
  clock_ = j.value("clock", uint64_t(0));
  if (j.contains("groups"))
    for (auto it = j["groups"].begin(); it != j["groups"].end(); ++it) {
      StreamGroup g;
      g.group = it.value().at("group").get<GroupId>();
      g.bytes = it.value().at("bytes").get<uint64_t>();
      g.last_tick = it.value().at("last_tick").get<uint64_t>();
      groups_[StreamId(std::stoul(it.key()))] = g;
    }
  if (j.contains("kmeans") && cfg_.mode == PlacementConfig::Mode::kLearned)
    model_ = MiniBatchKmeans::from_json(j["kmeans"]);
  pending_.clear();
}

}  // namespace valet
