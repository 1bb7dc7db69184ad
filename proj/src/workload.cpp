#include "valet/workload.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <deque>
#include <random>

#include "valet/errors.hpp"
#include "valet/hints.hpp"

namespace valet {

namespace {

std::string numbered(const char* fmt, uint64_t n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, static_cast<unsigned long long>(n));
  return buf;
}

// Accumulates ops, assigning seq and trace-scoped fds.
class TraceBuilder {
 public:
  explicit TraceBuilder(uint64_t expected) { ops_.reserve(expected + 64); }

  int64_t open(const std::string& path, uint32_t flags, const std::string& label,
               uint64_t size_hint = 0) {
    TraceOp op;
    op.op = "open";
    op.path = path;
    op.fd = next_fd_++;
    op.flags = flags;
    op.label = label;
    op.size = size_hint;
    push(std::move(op));
    return next_fd_ - 1;
  }
  void write(int64_t fd, uint64_t size, uint64_t seed) {
    TraceOp op;
    op.op = "write";
    op.fd = fd;
    op.size = size;
    op.data_seed = seed;
    push(std::move(op));
  }
  void pwrite(int64_t fd, uint64_t offset, uint64_t size, uint64_t seed) {
    TraceOp op;
    op.op = "write";
    op.fd = fd;
    op.offset = static_cast<int64_t>(offset);
    op.size = size;
    op.data_seed = seed;
    push(std::move(op));
  }
  void read(int64_t fd, uint64_t offset, uint64_t size) {
    TraceOp op;
    op.op = "read";
    op.fd = fd;
    op.offset = static_cast<int64_t>(offset);
    op.size = size;
    push(std::move(op));
  }
  void fsync(int64_t fd) { simple("fsync", fd); }
  void close(int64_t fd) { simple("close", fd); }
  void truncate(int64_t fd, uint64_t size) {
    TraceOp op;
    op.op = "truncate";
    op.fd = fd;
    op.size = size;
    push(std::move(op));
  }
  void unlink(const std::string& path) {
    TraceOp op;
    op.op = "unlink";
    op.path = path;
    push(std::move(op));
  }
  void rename(const std::string& from, const std::string& to) {
    TraceOp op;
    op.op = "rename";
    op.path = from;
    op.path2 = to;
    push(std::move(op));
  }

  size_t size() const { return ops_.size(); }
  std::vector<TraceOp> take() { return std::move(ops_); }

 private:
  void simple(const char* name, int64_t fd) {
    TraceOp op;
    op.op = name;
    op.fd = fd;
    push(std::move(op));
  }
  void push(TraceOp op) {
    op.seq = ops_.size();
    ops_.push_back(std::move(op));
  }

  std::vector<TraceOp> ops_;
  int64_t next_fd_ = 1;
};

void require(bool ok, const char* what) {
  if (!ok) throw ValetError(Errc::invalid_config, std::string("trace params: ") + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// LSM KV store
// ---------------------------------------------------------------------------

std::vector<TraceOp> gen_lsm_trace(const LsmTraceParams& p, uint64_t seed) {
  require(p.op_count > 0, "op_count must be positive");
  require(p.key_size > 0 && p.value_size > 0, "key/value sizes must be positive");
  const uint64_t record = p.key_size + p.value_size + 8;  // 8-byte record header
  require(p.wal_segment_bytes >= record, "wal segment smaller than one record");
  require(p.wal_fsync_every > 0, "wal_fsync_every must be positive");
  require(p.fifo_retention > 0, "fifo_retention must be positive");
  require(p.sst_bytes > 0 && p.sst_chunk_bytes > 0, "sst sizes must be positive");
  require(p.sst_chunk_bytes <= p.sst_bytes, "sst chunk larger than run");
  require(p.compaction_fan_in > 1, "compaction_fan_in must exceed 1");
  require(p.l1_retention > 0, "l1_retention must be positive");

  std::mt19937_64 rng(seed);
  TraceBuilder b(p.op_count);

  int64_t wal_fd = -1;
  std::string wal_path;
  uint64_t wal_index = 0, wal_bytes = 0;
  uint32_t puts_since_fsync = 0;
  std::deque<std::string> closed_wals;

  uint64_t memtable = 0;
  uint64_t sst_index = 0, l1_index = 0;
  std::deque<std::string> l0_runs;
  std::deque<std::string> l1_runs;

  auto write_run = [&](const std::string& path, const std::string& label, uint64_t bytes) {
    int64_t fd = b.open(path, kOfWrite | kOfCreate, label, bytes);
    for (uint64_t left = bytes; left > 0;) {
      uint64_t n = std::min(left, p.sst_chunk_bytes);
      b.write(fd, n, rng());
      left -= n;
    }
    b.fsync(fd);
    b.close(fd);
  };

  auto compact = [&]() {
    // Merge reads sample head and tail of each input run.
    for (const auto& run : l0_runs) {
      int64_t fd = b.open(run, kOfRead, "sst_l0");
      uint64_t head = std::min(p.sst_chunk_bytes, p.sst_bytes);
      b.read(fd, 0, head);
      if (p.sst_bytes > head) b.read(fd, p.sst_bytes - head, head);
      b.close(fd);
    }
    std::string merged = "sst/L1/" + numbered("%06llu.sst", l1_index++);
    write_run(merged, "sst_l1", p.sst_bytes * p.compaction_fan_in);
    for (const auto& run : l0_runs) b.unlink(run);
    l0_runs.clear();
    l1_runs.push_back(merged);
    if (l1_runs.size() > p.l1_retention) {
      b.unlink(l1_runs.front());
      l1_runs.pop_front();
    }
  };

  auto flush_memtable = [&]() {
    std::string run = "sst/L0/" + numbered("%06llu.sst", sst_index++);
    write_run(run, "sst_l0", p.sst_bytes);
    l0_runs.push_back(run);
    memtable = 0;
    if (l0_runs.size() >= p.compaction_fan_in) compact();
  };

  auto rotate_wal = [&]() {
    b.fsync(wal_fd);
    b.close(wal_fd);
    wal_fd = -1;
    closed_wals.push_back(wal_path);
    wal_bytes = 0;
    puts_since_fsync = 0;
    if (closed_wals.size() > p.fifo_retention) {
      b.unlink(closed_wals.front());
      closed_wals.pop_front();
    }
  };

  while (b.size() < p.op_count) {
    if (wal_fd < 0) {
      wal_path = "wal/" + numbered("%06llu.log", wal_index++);
      wal_fd = b.open(wal_path, kOfWrite | kOfCreate | kOfAppend, "wal");
    }
    b.write(wal_fd, record, rng());
    wal_bytes += record;
    memtable += p.key_size + p.value_size;
    if (++puts_since_fsync >= p.wal_fsync_every) {
      b.fsync(wal_fd);
      puts_since_fsync = 0;
    }
    if (wal_bytes >= p.wal_segment_bytes) rotate_wal();
    if (memtable >= p.sst_bytes) flush_memtable();
  }
  if (wal_fd >= 0) {
    b.fsync(wal_fd);
    b.close(wal_fd);
  }
  return b.take();
}

std::string lsm_ruleset() {
  return "glob wal/* -> 0\n"
         "glob sst/L0/* -> 1\n"
         "glob sst/L1/* -> 2\n"
         "default -> 3\n";
}

// ---------------------------------------------------------------------------
// Flash cache
// ---------------------------------------------------------------------------

std::vector<TraceOp> gen_cache_trace(const CacheTraceParams& p, uint64_t seed) {
  require(p.op_count > 0, "op_count must be positive");
  require(p.small_object_bytes > 0, "small_object_bytes must be positive");
  require(p.small_region_bytes >= p.small_object_bytes, "region smaller than one object");
  require(p.small_regions_retained > 0, "small_regions_retained must be positive");
  require(p.large_object_bytes > 0 && p.large_chunk_bytes > 0, "large sizes must be positive");
  require(p.large_chunk_bytes <= p.large_object_bytes, "large chunk exceeds object");
  require(p.large_objects_retained > 0, "large_objects_retained must be positive");
  require(p.large_percent <= 100 && p.get_percent <= 100, "percentages exceed 100");

  std::mt19937_64 rng(seed);
  TraceBuilder b(p.op_count);

  struct Region {
    std::string path;
    uint64_t objects = 0;  // object i sits at offset i * small_object_bytes
  };
  int64_t region_fd = -1;
  Region open_region;
  uint64_t region_index = 0;
  std::deque<Region> closed_regions;

  uint64_t large_index = 0;
  std::deque<std::string> live_large;

  auto set_small = [&]() {
    if (region_fd < 0) {
      open_region = {"cache/small/" + numbered("%05llu.dat", region_index++), 0};
      region_fd = b.open(open_region.path, kOfWrite | kOfCreate | kOfAppend, "cache_small",
                         p.small_region_bytes);
    }
    b.write(region_fd, p.small_object_bytes, rng());
    ++open_region.objects;
    if (open_region.objects * p.small_object_bytes >= p.small_region_bytes) {
      b.fsync(region_fd);
      b.close(region_fd);
      region_fd = -1;
      closed_regions.push_back(open_region);
      open_region = {};
      if (closed_regions.size() > p.small_regions_retained) {
        b.unlink(closed_regions.front().path);
        closed_regions.pop_front();
      }
    }
  };

  auto set_large = [&]() {
    std::string path = "cache/large/" + numbered("%06llu.dat", large_index++);
    int64_t fd = b.open(path, kOfWrite | kOfCreate, "cache_large", p.large_object_bytes);
    for (uint64_t left = p.large_object_bytes; left > 0;) {
      uint64_t n = std::min(left, p.large_chunk_bytes);
      b.write(fd, n, rng());
      left -= n;
    }
    b.fsync(fd);
    b.close(fd);
    live_large.push_back(path);
    if (live_large.size() > p.large_objects_retained) {
      b.unlink(live_large.front());
      live_large.pop_front();
    }
  };

  auto get = [&]() -> bool {
    uint64_t small_count = open_region.objects;
    for (const auto& r : closed_regions) small_count += r.objects;
    uint64_t total = small_count + live_large.size();
    if (total == 0) return false;
    uint64_t pick = rng() % total;
    if (pick < small_count) {
      // Walk regions to the picked object (region counts are tiny).
      const Region* r = nullptr;
      bool current = false;
      for (const auto& cr : closed_regions) {
        if (pick < cr.objects) {
          r = &cr;
          break;
        }
        pick -= cr.objects;
      }
      if (!r) {
        r = &open_region;
        current = true;
      }
      uint64_t offset = pick * p.small_object_bytes;
      if (current) {
        b.read(region_fd, offset, p.small_object_bytes);
      } else {
        int64_t fd = b.open(r->path, kOfRead, "cache_small");
        b.read(fd, offset, p.small_object_bytes);
        b.close(fd);
      }
    } else {
      const std::string& path = live_large[pick - small_count];
      int64_t fd = b.open(path, kOfRead, "cache_large");
      uint64_t slots = p.large_object_bytes / p.large_chunk_bytes;
      uint64_t offset = (slots ? rng() % slots : 0) * p.large_chunk_bytes;
      b.read(fd, offset, std::min(p.large_chunk_bytes, p.large_object_bytes - offset));
      b.close(fd);
    }
    return true;
  };

  while (b.size() < p.op_count) {
    bool want_get = rng() % 100 < p.get_percent;
    if (want_get && get()) continue;
    if (rng() % 100 < p.large_percent)
      set_large();
    else
      set_small();
  }
  if (region_fd >= 0) {
    b.fsync(region_fd);
    b.close(region_fd);
  }
  return b.take();
}

std::string cache_ruleset() {
  return "glob cache/small/* -> 0\n"
         "glob cache/large/* -> 1\n"
         "default -> 2\n";
}

// ---------------------------------------------------------------------------
// B-tree engine with mmap journal
// ---------------------------------------------------------------------------

std::vector<TraceOp> gen_wt_trace(const WtTraceParams& p, uint64_t seed) {
  require(p.op_count > 0, "op_count must be positive");
  require(p.record_bytes > 0, "record_bytes must be positive");
  require(p.log_bytes >= p.record_bytes, "log smaller than one record");
  require(p.log_bytes % p.record_bytes == 0, "log_bytes must be a record multiple");
  require(p.checkpoint_every > 0, "checkpoint_every must be positive");
  require(p.table_bytes > 0 && p.table_chunk_bytes > 0, "table sizes must be positive");
  require(p.table_chunk_bytes <= p.table_bytes, "table chunk exceeds table");
  require(p.tables_retained > 0, "tables_retained must be positive");
  require(p.read_percent <= 100, "percentages exceed 100");

  std::mt19937_64 rng(seed);
  TraceBuilder b(p.op_count);

  const uint64_t slots = p.log_bytes / p.record_bytes;
  int64_t journal = b.open("wt/journal.mmap", kOfWrite | kOfCreate | kTfMmapWritable, "wt_log");
  uint64_t slot = 0;
  uint32_t since_checkpoint = 0;

  uint64_t table_index = 0;
  std::deque<std::string> tables;

  auto checkpoint = [&]() {
    b.fsync(journal);
    std::string path = "wt/tables/" + numbered("%05llu.wt", table_index++);
    int64_t fd = b.open(path, kOfWrite | kOfCreate, "wt_table", p.table_bytes);
    for (uint64_t left = p.table_bytes; left > 0;) {
      uint64_t n = std::min(left, p.table_chunk_bytes);
      b.write(fd, n, rng());
      left -= n;
    }
    b.fsync(fd);
    b.close(fd);
    tables.push_back(path);
    if (tables.size() > p.tables_retained) {
      b.unlink(tables.front());
      tables.pop_front();
    }
  };

  while (b.size() < p.op_count) {
    bool want_read = rng() % 100 < p.read_percent;
    if (want_read && slot > 0) {
      if (!tables.empty() && rng() % 2 == 0) {
        const std::string& path = tables[rng() % tables.size()];
        int64_t fd = b.open(path, kOfRead, "wt_table");
        uint64_t chunks = p.table_bytes / p.table_chunk_bytes;
        uint64_t offset = (chunks ? rng() % chunks : 0) * p.table_chunk_bytes;
        b.read(fd, offset, std::min(p.table_chunk_bytes, p.table_bytes - offset));
        b.close(fd);
      } else {
        uint64_t written = std::min(slot, slots);
        b.read(journal, (rng() % written) * p.record_bytes, p.record_bytes);
      }
      continue;
    }
    b.pwrite(journal, (slot % slots) * p.record_bytes, p.record_bytes, rng());
    ++slot;
    if (++since_checkpoint >= p.checkpoint_every) {
      checkpoint();
      since_checkpoint = 0;
    }
  }
  b.fsync(journal);
  b.close(journal);
  return b.take();
}

std::string wt_ruleset() {
  return "glob wt/tables/* -> 0\n"
         "default -> 1\n";
}

// ---------------------------------------------------------------------------
// Multi-tenant helpers
// ---------------------------------------------------------------------------

std::vector<TraceOp> prefix_tenant(std::vector<TraceOp> ops, const std::string& tenant) {
  for (auto& op : ops) {
    if (!op.path.empty()) op.path = tenant + "/" + op.path;
    if (!op.path2.empty()) op.path2 = tenant + "/" + op.path2;
    if (!op.label.empty()) op.label = tenant + "/" + op.label;
  }
  return ops;
}

std::vector<TraceOp> merge_traces(const std::vector<std::vector<TraceOp>>& traces) {
  if (traces.empty()) return {};
  std::vector<TraceOp> out;
  size_t total = 0;
  for (const auto& t : traces) total += t.size();
  out.reserve(total);
  const int64_t n = static_cast<int64_t>(traces.size());
  std::vector<size_t> cursor(traces.size(), 0);
  for (size_t merged = 0; merged < total;) {
    for (size_t i = 0; i < traces.size(); ++i) {
      if (cursor[i] >= traces[i].size()) continue;
      TraceOp op = traces[i][cursor[i]++];
      op.seq = out.size();
      // Interleave fd namespaces so tenants cannot collide.
      if (op.fd >= 0) op.fd = op.fd * n + static_cast<int64_t>(i);
      out.push_back(std::move(op));
      ++merged;
    }
  }
  return out;
}

}  // namespace valet
