#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "valet/meta_store.hpp"
#include "valet/placement.hpp"
#include "valet/zoned_device.hpp"

namespace valet {

using Uuid = uint64_t;

// Extent mapper: files are sequences of extents appended into zones, one
// stream per zone.  Writes buffer in a pre-allocated pool and flush as
// block-aligned extents (allocate-on-flush); fsync/close flush the residue
// and commit metadata.  Garbage collection is lazy: zones whose extents are
// all invalid are reclaimed without moving a byte, and relocation only runs
// when the free-zone floor is breached.
//
// Crash safety rule that shapes the whole file: the device is mutated
// destructively (zone resets, region reuse) only *after* a metadata commit
// that no longer references the bytes being destroyed.  Hence the
// pending-reclaim queue, and hence unlink/rename being commit points.

struct MapperConfig {
  uint32_t stream_budget = 4;             // concurrently open zones (<= device max_open)
  uint64_t max_extent_bytes = 512 * 1024; // buffer slot size, hard extent cap
  uint64_t extent_flush_bytes = 512 * 1024;  // auto-flush threshold (<= max extent)
  uint32_t gc_free_zone_threshold = 4;    // replenish free zones up to this floor
  uint64_t buffer_pool_bytes = 64ull << 20;  // total write buffer (two 32 MiB arenas' worth)
  uint32_t read_cache_extents = 64;       // readahead cache capacity (correctness-neutral)

  void validate(const DeviceConfig& dev) const;
};

struct ExtentRec {
  uint32_t zone = 0;
  uint64_t offset = 0;   // block-aligned start within the zone
  uint64_t length = 0;   // allocated bytes (block-aligned)
  uint64_t payload = 0;  // live bytes (<= length; < length only for sync tails)
  GroupId group = 0;
  bool relocated = false;
};

struct ZoneDirEntry {
  uint64_t offset = 0;
  uint64_t length = 0;
  Uuid uuid = 0;
  GroupId group = 0;
  bool relocated = false;
  bool valid = true;
};

struct ZoneSnapshot {
  uint32_t zone = 0;
  StreamId stream = 0;
  bool is_current = false;  // some stream's active append target
  std::vector<ZoneDirEntry> entries;
  uint32_t valid_count = 0;
};

struct GcStepReport {
  uint32_t victim = 0;
  uint32_t moved_extents = 0;
  uint64_t moved_bytes = 0;  // allocated bytes relocated
};

struct MapperStats {
  uint64_t logical_bytes_written = 0;
  uint64_t logical_bytes_flushed = 0;
  uint64_t physical_bytes_appended = 0;  // flush extents + relocations
  uint64_t padding_bytes = 0;            // alignment tails on flushed extents
  uint64_t truncate_slack_bytes = 0;     // dead bytes stranded in valid extents
  uint64_t gc_calls = 0;                 // gc passes that performed work
  uint64_t gc_bytes_moved = 0;
  uint64_t zones_reclaimed = 0;          // all reclaim resets
  uint64_t zones_reset_without_move = 0; // subset: zero-move reclaims
  uint64_t commits = 0;
  uint64_t read_cache_hits = 0;
  uint64_t read_cache_misses = 0;
  // live gauges (filled by stats())
  uint64_t free_zones = 0;
  uint64_t pending_reclaim = 0;
  uint32_t open_files = 0;
  uint32_t buffer_pool_size = 0;
  uint32_t buffer_pool_in_use = 0;
  uint32_t buffer_pool_peak = 0;
  std::map<StreamId, uint64_t> per_stream_physical;
};

// Fixed-slot arena of max-extent-sized write buffers, pre-allocated so the
// steady-state write path never touches the heap.
class BufferPool {
 public:
  BufferPool(uint32_t count, uint64_t slot_bytes);
  uint32_t acquire();          // throws BufferPoolExhausted
  void release(uint32_t idx);
  uint8_t* data(uint32_t idx) { return arena_.data() + uint64_t(idx) * slot_bytes_; }
  uint32_t size() const { return count_; }
  uint32_t in_use() const { return in_use_; }
  uint32_t peak() const { return peak_; }

 private:
  uint64_t slot_bytes_;
  uint32_t count_;
  uint32_t in_use_ = 0;
  uint32_t peak_ = 0;
  std::vector<uint32_t> free_;
  std::vector<uint8_t> arena_;
};

class Mapper {
 public:
  Mapper(ZonedDevice& dev, PlacementEngine& engine, MetaStore& meta, MapperConfig cfg);
  ~Mapper();  // releases buffers; never commits (that's what close/fsync are for)

  // Extra state persisted inside the mapper's atomic commit (facade uses
  // this for the conventional store).  Register before mount().
  void register_sidecar(const std::string& key, std::function<nlohmann::json()> save,
                        std::function<void(const nlohmann::json&)> restore);

  // Runs after every successful commit, alongside pending zone resets.
  // Lets sidecar owners release resources only the old committed state
  // still referenced (e.g. quarantined conventional-region ranges).
  void register_commit_hook(std::function<void()> hook);

  // Recovery: loads the last committed metadata (fresh store if none),
  // cross-checks device geometry and write pointers, resets unreferenced
  // zones, and resumes per-stream append targets.
  void mount();

  // --- file namespace ---
  Uuid open_file(const FileMeta& meta);
  void close_file(Uuid u, bool writable);
  bool exists(const std::string& path) const;
  std::optional<Uuid> lookup(const std::string& path) const;
  std::vector<std::string> list_paths() const;
  void unlink(const std::string& path);                  // commit point
  void rename(const std::string& from, const std::string& to);  // commit point

  // --- data path ---
  void write(Uuid u, std::span<const uint8_t> data);     // append at logical EOF
  Bytes read(Uuid u, uint64_t offset, uint64_t len);
  void fsync(Uuid u);                                    // flush residue + commit
  void truncate(Uuid u, uint64_t new_size);              // metadata-only
  void readahead(Uuid u, uint64_t offset, uint64_t len); // populate read cache

  uint64_t size(Uuid u) const;          // logical (includes buffered tail)
  uint64_t durable_size(Uuid u) const;  // flushed prefix length
  StreamId stream_of(Uuid u) const;
  std::vector<ExtentRec> extents_of(Uuid u) const;

  // --- maintenance ---
  // One reclamation step: picks the Full zone with the fewest valid extents
  // (ties to the lowest id), relocates its live extents to the owning
  // stream's current zone, and queues the victim for a post-commit reset.
  // Returns nullopt when no eligible victim exists.
  std::optional<GcStepReport> gc_step();

  // Runs gc_step until the free-zone floor (config) is met or no victim
  // remains.  Called from commit-point ops and on allocation pressure.
  void gc_check();

  // Serializes everything and commits through the slot/pointer protocol,
  // then performs any now-safe zone resets.
  void commit_metadata();

  MapperStats stats() const;
  std::vector<ZoneSnapshot> zone_snapshots() const;
  uint64_t free_zone_count() const;
  const MapperConfig& config() const { return cfg_; }
  MetaStore& meta_store() { return meta_; }

 private:
  struct FileRecord {
    Uuid uuid = 0;
    StreamId stream = 0;
    GroupId group_at_open = 0;
    uint64_t logical_size = 0;
    uint64_t durable_size = 0;
    std::vector<ExtentRec> extents;
  };

  struct OpenState {
    uint32_t open_count = 0;
    bool writable = false;
    std::optional<uint32_t> buf;  // BufferPool slot
    uint64_t fill = 0;            // bytes buffered
  };

  struct ZoneMeta {
    StreamId stream = 0;
    std::vector<ZoneDirEntry> entries;  // offset-ordered
    uint32_t valid_count = 0;
    uint64_t tail = 0;  // next append offset (mirrors device wp)
  };

  FileRecord& rec(Uuid u);
  const FileRecord& rec(Uuid u) const;
  OpenState& open_state(Uuid u);

  uint32_t fetch_free_zone(StreamId s);
  uint32_t ensure_stream_zone(StreamId s, uint64_t need);
  void rotate_away_from(StreamId s);  // finish current zone, queue if dead
  std::pair<uint32_t, uint64_t> append_raw(StreamId s, std::span<const uint8_t> bytes);

  void flush_residue(Uuid u);
  void flush_extent(FileRecord& f, OpenState& os, uint64_t payload_len);
  void invalidate_extent(const ExtentRec& e);
  void note_zone_maybe_dead(uint32_t zone);
  void process_pending_reclaims();
  std::optional<uint32_t> pick_victim() const;
  void unlink_locked(const std::string& path);
  void drop_cache_for_zone(uint32_t zone);
  Bytes read_extent_slice(const ExtentRec& e, uint64_t off, uint64_t len);
  void cache_put(uint32_t zone, uint64_t offset, Bytes bytes);
  const Bytes* cache_get(uint32_t zone, uint64_t offset);

  nlohmann::json serialize_state() const;
  void restore_state(const nlohmann::json& j);

  ZonedDevice& dev_;
  PlacementEngine& engine_;
  MetaStore& meta_;
  MapperConfig cfg_;

  std::map<std::string, Uuid> path_map_;
  std::map<Uuid, FileRecord> files_;
  std::map<Uuid, OpenState> open_;
  std::map<uint32_t, ZoneMeta> zones_;
  std::map<StreamId, uint32_t> stream_zone_;
  std::set<uint32_t> free_zones_;
  std::set<uint32_t> pending_reclaim_;
  std::set<uint32_t> pending_moved_;  // pending victims that had extents moved
  Uuid next_uuid_ = 1;
  bool mounted_ = false;
  bool in_gc_ = false;

  std::unique_ptr<BufferPool> pool_;
  MapperStats stats_;

  struct CacheEntry {
    uint32_t zone;
    uint64_t offset;
    Bytes bytes;
  };
  std::deque<CacheEntry> read_cache_;  // FIFO, small

  struct Sidecar {
    std::function<nlohmann::json()> save;
    std::function<void(const nlohmann::json&)> restore;
  };
  std::map<std::string, Sidecar> sidecars_;
  std::vector<std::function<void()>> commit_hooks_;

  mutable std::recursive_mutex mu_;
};

}  // namespace valet
