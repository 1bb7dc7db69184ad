#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valet/trace.hpp"

namespace valet {

// ---------------------------------------------------------------------------
// Trace generators.  Each models the I/O shape of a storage engine at desk
// scale: same structure (append streams with distinct lifetimes, FIFO
// retention, compaction churn), a few thousand times smaller.  Generation is
// deterministic in (params, seed); sizes count payload bytes.
// ---------------------------------------------------------------------------

// Log-structured KV store: a write-ahead log with frequent tiny appends and
// segment FIFO retention, memtable flushes into L0 sorted runs, and fan-in
// compaction rewriting L0 runs into longer-lived L1 runs.
struct LsmTraceParams {
  uint64_t op_count = 100000;       // approximate trace length in ops
  uint32_t key_size = 20;           // bytes per key
  uint32_t value_size = 400;        // bytes per value
  uint64_t wal_segment_bytes = 256 * 1024;  // segment rotation threshold
  uint32_t wal_fsync_every = 64;    // puts per WAL fsync (group commit)
  uint32_t fifo_retention = 3;      // closed WAL segments kept before unlink
  uint64_t sst_bytes = 1 << 20;     // memtable flush threshold / run size
  uint64_t sst_chunk_bytes = 128 * 1024;  // write granularity for runs
  uint32_t compaction_fan_in = 4;   // L0 runs merged per compaction
  uint32_t l1_retention = 3;        // merged runs kept before FIFO unlink
};
std::vector<TraceOp> gen_lsm_trace(const LsmTraceParams& params, uint64_t seed);

// Flash cache: small objects coalesced into append-only region files plus
// individually-written large objects, both evicted FIFO; gets read back
// random live objects.
struct CacheTraceParams {
  uint64_t op_count = 100000;
  uint32_t small_object_bytes = 256;
  uint64_t small_region_bytes = 128 * 1024;  // region rotation threshold
  uint32_t small_regions_retained = 4;
  uint64_t large_object_bytes = 64 * 1024;
  uint64_t large_chunk_bytes = 64 * 1024;
  uint32_t large_objects_retained = 8;
  uint32_t large_percent = 20;  // share of sets that are large objects
  uint32_t get_percent = 40;    // share of ops that are reads
};
std::vector<TraceOp> gen_cache_trace(const CacheTraceParams& params, uint64_t seed);

// B-tree engine with a memory-mapped journal: a writable-mmap circular log
// updated in place (routed around the zone backend), checkpointed into
// sequential table files with FIFO retention.
struct WtTraceParams {
  uint64_t op_count = 100000;
  uint64_t log_bytes = 64 * 1024;   // circular journal size
  uint32_t record_bytes = 256;      // in-place journal slot size
  uint32_t checkpoint_every = 512;  // journal writes per checkpoint
  uint64_t table_bytes = 256 * 1024;  // checkpoint table size
  uint64_t table_chunk_bytes = 64 * 1024;
  uint32_t tables_retained = 4;
  uint32_t read_percent = 10;
};
std::vector<TraceOp> gen_wt_trace(const WtTraceParams& params, uint64_t seed);

// Rulesets matching each generator's namespace, suitable as placement policy
// for single-tenant replay.  Streams are dense from 0; `default` terminates.
std::string lsm_ruleset();    // wal -> 0, L0 runs -> 1, L1 runs -> 2, default 3
std::string cache_ruleset();  // small regions -> 0, large objects -> 1, default 2
std::string wt_ruleset();     // tables -> 0, default 1 (journal bypasses zones)

// Prefixes every path and label of `ops` with "<tenant>/" so several tenants
// can share one facade without namespace collisions.
std::vector<TraceOp> prefix_tenant(std::vector<TraceOp> ops, const std::string& tenant);

// Deterministic round-robin merge of several traces into one.  Paths must
// already be disjoint (see prefix_tenant); seq and fd namespaces are
// reassigned here.
std::vector<TraceOp> merge_traces(const std::vector<std::vector<TraceOp>>& traces);

}  // namespace valet
