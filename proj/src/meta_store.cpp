#include "valet/meta_store.hpp"

#include <filesystem>
#include <fstream>

namespace valet {

namespace fs = std::filesystem;
using nlohmann::json;

MetaStore::MetaStore(std::string dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
}

std::string MetaStore::slot_path(char slot) const {
  return dir_ + "/meta." + std::string(1, slot);
}

std::string MetaStore::cur_path() const { return dir_ + "/meta.cur"; }

void MetaStore::fire(CommitPhase p) {
  if (hook_) hook_(p);
}

std::optional<json> MetaStore::try_read_slot(char slot) const {
  std::ifstream is(slot_path(slot), std::ios::binary);
  if (!is) return std::nullopt;
  json j = json::parse(is, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  if (!j.is_object() || !j.contains("version") || !j.contains("generation")) return std::nullopt;
  if (j["version"].get<int>() != kMetaVersion) return std::nullopt;
  return j;
}

std::optional<json> MetaStore::load() {
  bool a_exists = fs::exists(slot_path('a'));
  bool b_exists = fs::exists(slot_path('b'));
  if (!a_exists && !b_exists) {
    active_slot_ = 0;
    generation_ = 0;
    return std::nullopt;
  }

  char pointed = 0;
  {
    std::ifstream is(cur_path());
    std::string s;
    if (is >> s && (s == "a" || s == "b")) pointed = s[0];
  }

  auto pick = [&](char slot) -> std::optional<json> {
    auto j = try_read_slot(slot);
    if (j) {
      active_slot_ = slot;
      generation_ = (*j)["generation"].get<uint64_t>();
    }
    return j;
  };

  if (pointed) {
    if (auto j = pick(pointed)) return j;
    if (auto j = pick(pointed == 'a' ? 'b' : 'a')) return j;
  } else {
    // No usable pointer: take the valid slot with the highest generation.
    auto ja = try_read_slot('a');
    auto jb = try_read_slot('b');
    if (ja && jb) {
      char best = (*ja)["generation"].get<uint64_t>() >= (*jb)["generation"].get<uint64_t>()
                      ? 'a'
                      : 'b';
      return pick(best);
    }
    if (ja) return pick('a');
    if (jb) return pick('b');
  }
  throw_errc(Errc::corrupt_metadata, "no valid metadata slot in " + dir_);
}

void MetaStore::commit(json state) {
  state["version"] = kMetaVersion;
  state["generation"] = generation_ + 1;
  const std::string body = state.dump();

  char target = (active_slot_ == 'a') ? 'b' : 'a';
  const std::string path = slot_path(target);

  fire(CommitPhase::kBeforeSlotWrite);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw_errc(Errc::out_of_range, "cannot write slot " + path);
    size_t half = body.size() / 2;
    os.write(body.data(), std::streamsize(half));
    os.flush();
    fire(CommitPhase::kMidSlotWrite);  // slot genuinely torn if this throws
    os.write(body.data() + half, std::streamsize(body.size() - half));
    os.flush();
    if (!os) throw_errc(Errc::out_of_range, "short write to slot " + path);
  }
  fire(CommitPhase::kAfterSlotWrite);

  // Verify the slot before pointing at it.
  auto back = try_read_slot(target);
  if (!back || (*back)["generation"].get<uint64_t>() != generation_ + 1)
    throw_errc(Errc::corrupt_metadata, "slot verification failed for " + path);

  // Atomic pointer swap: write a temp file, then rename over meta.cur.
  const std::string tmp = cur_path() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << target << '\n';
    os.flush();
    if (!os) throw_errc(Errc::out_of_range, "cannot write pointer tmp " + tmp);
  }
  fs::rename(tmp, cur_path());

  // The commit instant has passed: reflect it in memory before the last
  // hook so a post-swap crash still observes consistent state.
  active_slot_ = target;
  generation_ += 1;
  fire(CommitPhase::kAfterPointerSwap);
}

}  // namespace valet
