#pragma once

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "valet/conv_store.hpp"
#include "valet/mapper.hpp"
#include "valet/trace.hpp"
#include "valet/vfs.hpp"
#include "valet/zoned_device.hpp"

namespace valet {

// ---------------------------------------------------------------------------
// Stack: one mounted storage system (device, placement, metadata, mapper,
// conventional store, facade) built in the order the facade requires.
// ---------------------------------------------------------------------------

struct StackConfig {
  DeviceConfig device;
  MapperConfig mapper;
  PlacementConfig placement;
  VfsConfig vfs;
  std::string meta_dir;
  uint64_t conv_align = 512;
};

struct Stack {
  explicit Stack(const StackConfig& cfg);
  // Recovery over an existing device image (crash harness: a clone of the
  // crashed device plus a copy of its metadata directory).
  Stack(const StackConfig& cfg, std::unique_ptr<ZonedDevice> existing);

  StackConfig config;
  std::unique_ptr<ZonedDevice> device;
  std::unique_ptr<PlacementEngine> engine;
  std::unique_ptr<MetaStore> meta;
  std::unique_ptr<Mapper> mapper;
  std::unique_ptr<ConventionalStore> conv;
  std::unique_ptr<VfsFacade> vfs;
};

// Named placement policies for replay comparisons:
//   valet        heuristic rules at full stream fidelity
//   valet-learn  learned clustering with k = stream_budget
//   single       everything to stream 0 (single-stream baseline)
//   temp4        the same rules collapsed onto the 4 kernel hint classes
PlacementConfig make_policy(const std::string& name, const std::string& rules_text,
                            uint32_t stream_budget);

// ---------------------------------------------------------------------------
// Shadow oracle: an independent model of what every file must contain, which
// reads must return, and which state must survive a crash.  It re-derives
// flush boundaries and conventional-region growth from the configured
// constants instead of asking the stack, so a stack bug cannot hide.
// ---------------------------------------------------------------------------

class ShadowOracle {
 public:
  ShadowOracle(uint64_t extent_flush_bytes, uint64_t conv_align);

  // Live mirroring, driven op by op.  `mapper_route` is the facade's routing
  // decision for the path (fixed at first open).
  void on_open(const std::string& path, uint32_t flags, bool mapper_route);
  void on_append(const std::string& path, std::span<const uint8_t> data);
  void on_pwrite(const std::string& path, uint64_t offset, std::span<const uint8_t> data);
  void on_truncate(const std::string& path, uint64_t new_size);
  void on_unlink(const std::string& path);
  void on_rename(const std::string& from, const std::string& to);
  void on_flush(const std::string& path);  // fsync/writable close: residue flushed
  void on_commit();                        // any commit point: durable view advances

  bool exists(const std::string& path) const { return live_.count(path) != 0; }
  uint64_t live_size(const std::string& path) const;
  Bytes expected_read(const std::string& path, uint64_t offset, uint64_t len) const;

  // What recovery must reconstruct if the system stopped dead right now:
  // exactly the files of the last commit; zone-backed content to the flushed
  // prefix as of that commit, conventional content per the in-place rules.
  struct CrashFile {
    Bytes content;
    bool mapper_backed = true;
  };
  std::map<std::string, CrashFile> crash_image() const;

  uint64_t commit_count() const { return commits_; }

 private:
  struct OFile {
    std::shared_ptr<Bytes> content = std::make_shared<Bytes>();
    uint64_t size = 0;
    bool mapper_backed = true;
    bool open_writable = false;
    // zone route: durable prefix after the last full-extent flush boundary
    uint64_t flushed = 0;
    // conventional route: region-capacity mirror for the realloc rule
    uint64_t capacity = 0;
    uint64_t committed_size = 0;
    bool committed = false;             // file existed at the last commit
    bool realloc_since_commit = false;  // committed region frozen by a move
    std::shared_ptr<Bytes> frozen;      // its content, captured at the move
  };
  struct DurableFile {
    std::shared_ptr<const Bytes> content;  // shared with live via copy-on-write
    uint64_t len = 0;
    bool mapper_backed = true;
  };

  OFile& live(const std::string& path);
  const OFile& live(const std::string& path) const;
  static Bytes& mut(OFile& f);  // copy-on-write before mutation

  uint64_t flush_bytes_;
  uint64_t conv_align_;
  uint64_t commits_ = 0;
  std::map<std::string, OFile> live_;
  std::map<std::string, DurableFile> durable_;
};

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct ReplayMetrics {
  uint64_t trace_ops = 0;
  uint64_t verified_reads = 0;
  uint64_t crash_checks = 0;
  uint64_t interleaving_violations = 0;  // zones holding >1 reference label
  uint64_t labeled_zones = 0;            // zones holding >=1 labeled valid extent
  uint64_t end_free_zones = 0;
  double waf = 0.0;  // physical appended / logical flushed
  MapperStats mapper;
  DeviceCounters device;

  nlohmann::json to_json() const;
};

struct ReplayOptions {
  bool verify_reads = true;  // check every read against the oracle
  // Crash points: before executing the op with each seq, clone the device
  // and metadata, recover a fresh stack from the clone, and verify it equals
  // the oracle's crash image; then replay continues undisturbed.
  std::vector<uint64_t> crash_points;
};

ReplayMetrics replay(const std::vector<TraceOp>& trace, Stack& stack,
                     const ReplayOptions& opts = {});

// Round-robin-merges the traces (prefixing tenant i's paths and labels with
// "t<i>/") and replays the result on one stack.
ReplayMetrics replay_multi(const std::vector<std::vector<TraceOp>>& traces, Stack& stack,
                           const ReplayOptions& opts = {});

// `count` crash points spread deterministically over [1, trace length).
std::vector<uint64_t> spread_crash_points(uint64_t trace_len, uint64_t count, uint64_t seed);

}  // namespace valet
