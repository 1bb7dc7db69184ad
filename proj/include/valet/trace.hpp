#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "valet/errors.hpp"
#include "valet/hints.hpp"

namespace valet {

// One replayable operation.  Traces are line-delimited JSON, one op per
// line, so they stream, diff, and gzip well.  Replay of the same trace is
// bit-deterministic: payloads are synthesized from data_seed, never stored.
struct TraceOp {
  uint64_t seq = 0;
  std::string op;     // open|write|read|fsync|close|rename|unlink|truncate
  std::string path;   // open/unlink, rename source
  std::string path2;  // rename target
  int64_t fd = -1;    // trace-scoped handle, assigned by the generator
  uint64_t size = 0;  // write/read length, truncate target size
  int64_t offset = -1;    // read position; write: -1 = append, else positioned
  uint64_t data_seed = 0; // payload generator seed (write ops)
  uint32_t flags = 0;     // OpenFlags plus the trace-level bits below
  std::string label;      // reference stream tag ("wal", "sst", ...) for
                          // isolation accounting; never affects placement
};

// Trace-level flag: the open is a writable memory mapping (routes to the
// in-place backend).  Kept above the OpenFlags bit range.
constexpr uint32_t kTfMmapWritable = 1u << 16;

nlohmann::json trace_op_to_json(const TraceOp& op);
TraceOp trace_op_from_json(const nlohmann::json& j);

// Writes one op per line; a ".gz" suffix selects gzip output.
void write_trace(const std::string& file, const std::vector<TraceOp>& ops);

// Reads plain or gzipped JSONL transparently (gzip detected by content,
// not by file name).
std::vector<TraceOp> read_trace(const std::string& file);

// Ops grouped by label with op and byte counts -- the stream census the
// CLI prints after generation.
struct TraceCensus {
  struct Row {
    uint64_t ops = 0;
    uint64_t bytes_written = 0;
  };
  std::map<std::string, Row> by_label;
  uint64_t total_ops = 0;
};
TraceCensus census(const std::vector<TraceOp>& ops);

}  // namespace valet
