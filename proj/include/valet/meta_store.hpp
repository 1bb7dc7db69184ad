#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "valet/errors.hpp"

namespace valet {

// Crash-consistent JSON state store: two slot files (meta.a / meta.b) plus a
// pointer file (meta.cur) naming the authoritative slot.  A commit writes the
// full state to the inactive slot, re-reads and validates it, then atomically
// swaps the pointer (write tmp + rename).  A crash at any step leaves the
// previously committed slot untouched and pointed-to.
//
// Crash injection: the hook is invoked at fixed protocol phases; a test can
// throw from it to freeze on-disk state mid-commit.  kMidSlotWrite fires with
// the slot file genuinely half-written, emulating a torn write.

enum class CommitPhase {
  kBeforeSlotWrite,
  kMidSlotWrite,
  kAfterSlotWrite,
  kAfterPointerSwap,
};

class MetaStore {
 public:
  static constexpr int kMetaVersion = 1;

  // `dir` is created if missing.  Construction does not read state; call
  // load() to recover.
  explicit MetaStore(std::string dir);

  // Recovers the last committed state.  Returns nullopt when no slot file
  // exists (fresh store).  Throws CorruptMetadata when slot files exist but
  // none parses/validates.  Prefers the pointed slot; falls back to the
  // other; with no usable pointer, picks the valid slot with the highest
  // generation.
  std::optional<nlohmann::json> load();

  // Serializes `state` (version/generation fields are stamped in), commits
  // it, and advances the generation.  Throws whatever the injection hook
  // throws, leaving on-disk state as the protocol defines.
  void commit(nlohmann::json state);

  uint64_t generation() const { return generation_; }

  void set_crash_hook(std::function<void(CommitPhase)> hook) { hook_ = std::move(hook); }

  const std::string& dir() const { return dir_; }

 private:
  std::string slot_path(char slot) const;
  std::string cur_path() const;
  std::optional<nlohmann::json> try_read_slot(char slot) const;
  void fire(CommitPhase p);

  std::string dir_;
  char active_slot_ = 0;  // 0 = none yet
  uint64_t generation_ = 0;
  std::function<void(CommitPhase)> hook_;
};

// Exception tests/harnesses throw from the crash hook.
struct CrashInjected : ValetError {
  explicit CrashInjected(CommitPhase p)
      : ValetError(Errc::crash_injected, "phase " + std::to_string(int(p))) {}
};

}  // namespace valet
