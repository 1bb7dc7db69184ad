#pragma once

// Shared geometry for replay/crash tests: a small device that forces zone
// churn within a few thousand trace ops, plus mini generator parameter sets
// whose live set fits it with room to spare.

#include <filesystem>
#include <string>

#include "valet/replay.hpp"
#include "valet/workload.hpp"

namespace valet::testing {

inline StackConfig make_stack_config(const std::string& rules_text,
                                     const std::string& policy = "valet") {
  static int seq = 0;
  std::filesystem::path dir =
      std::filesystem::temp_directory_path() /
      ("valet_stack_" + std::to_string(::getpid()) + "_" + std::to_string(seq++));
  std::filesystem::create_directories(dir);

  StackConfig cfg;
  cfg.device.zone_count = 48;
  cfg.device.zone_capacity = 128 * 1024;
  cfg.device.block_size = 4096;
  cfg.device.max_open_zones = 14;
  cfg.device.conventional_bytes = 256 * 1024;

  cfg.mapper.stream_budget = 5;
  cfg.mapper.max_extent_bytes = 16 * 1024;
  cfg.mapper.extent_flush_bytes = 16 * 1024;
  cfg.mapper.gc_free_zone_threshold = 3;
  cfg.mapper.buffer_pool_bytes = 32 * 16 * 1024;
  cfg.mapper.read_cache_extents = 8;

  cfg.placement = make_policy(policy, rules_text, cfg.mapper.stream_budget);
  cfg.placement.group_quantum_bytes = 64 * 1024;

  cfg.meta_dir = (dir / "meta").string();
  return cfg;
}

inline LsmTraceParams mini_lsm_params() {
  LsmTraceParams p;
  p.op_count = 3000;
  p.wal_segment_bytes = 32 * 1024;
  p.wal_fsync_every = 16;
  p.fifo_retention = 2;
  p.sst_bytes = 64 * 1024;
  p.sst_chunk_bytes = 16 * 1024;
  p.compaction_fan_in = 3;
  p.l1_retention = 2;
  return p;
}

inline CacheTraceParams mini_cache_params() {
  CacheTraceParams p;
  p.op_count = 3000;
  p.small_object_bytes = 512;
  p.small_region_bytes = 32 * 1024;
  p.small_regions_retained = 3;
  p.large_object_bytes = 32 * 1024;
  p.large_chunk_bytes = 16 * 1024;
  p.large_objects_retained = 4;
  p.large_percent = 25;
  p.get_percent = 35;
  return p;
}

inline WtTraceParams mini_wt_params() {
  WtTraceParams p;
  p.op_count = 3000;
  p.log_bytes = 16 * 1024;
  p.record_bytes = 256;
  p.checkpoint_every = 128;
  p.table_bytes = 48 * 1024;
  p.table_chunk_bytes = 16 * 1024;
  p.tables_retained = 3;
  p.read_percent = 15;
  return p;
}

}  // namespace valet::testing
