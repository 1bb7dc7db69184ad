#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valet/replay.hpp"
#include "valet/trace.hpp"
#include <json.hpp>

namespace valet::report {

// All report JSON is deliberately free of timestamps, hostnames, and paths
// chosen at runtime, so identical invocations serialize byte-identically.
inline constexpr int kReportVersion = 1;

// Renders an aligned text table: first row is the header, columns padded to
// the widest cell, two spaces between columns.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

nlohmann::json geometry_json(const StackConfig& cfg);

// gen: per-label op/byte census plus totals.
std::string census_table(const TraceCensus& census);
nlohmann::json gen_report(const std::string& kind, uint64_t seed, uint64_t ops,
                          const TraceCensus& census);

// replay: versioned machine report + the human table printed beneath it.
nlohmann::json replay_report(const std::vector<std::string>& trace_files,
                             const std::string& policy, uint64_t seed,
                             const StackConfig& cfg, const ReplayMetrics& m);
std::string metrics_table(const ReplayMetrics& m);

// compare: one row per policy over the same trace and geometry.
struct CompareRow {
  std::string policy;
  double waf = 0.0;
  uint64_t gc_calls = 0;
  uint64_t bytes_moved = 0;
  uint64_t free_zones_end = 0;
  double purity = 1.0;  // single-label fraction of occupied zones
};
CompareRow compare_row(const std::string& policy, const ReplayMetrics& m);
nlohmann::json compare_report(const std::vector<std::string>& trace_files, uint64_t seed,
                              const StackConfig& cfg, const std::vector<CompareRow>& rows);
std::string compare_table(const std::vector<CompareRow>& rows);

}  // namespace valet::report
