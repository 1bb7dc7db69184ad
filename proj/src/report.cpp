#include "valet/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace valet::report {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size());
  for (size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (size_t c = 0; c < row.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    std::string line;
    for (size_t c = 0; c < width.size(); ++c) {
      std::string cell = c < row.size() ? row[c] : "";
      line += cell;
      if (c + 1 < width.size()) line += std::string(width[c] - cell.size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << "\n";
  };
  emit(header);
  std::vector<std::string> rule;
  for (size_t w : width) rule.push_back(std::string(w, '-'));
  emit(rule);
  for (const auto& row : rows) emit(row);
  return os.str();
}

json geometry_json(const StackConfig& cfg) {
  return json{{"zone_count", cfg.device.zone_count},
              {"zone_capacity", cfg.device.zone_capacity},
              {"block_size", cfg.device.block_size},
              {"max_open_zones", cfg.device.max_open_zones},
              {"conventional_bytes", cfg.device.conventional_bytes},
              {"stream_budget", cfg.mapper.stream_budget},
              {"extent_bytes", cfg.mapper.max_extent_bytes},
              {"flush_bytes", cfg.mapper.extent_flush_bytes},
              {"gc_free_zone_threshold", cfg.mapper.gc_free_zone_threshold}};
}

std::string census_table(const TraceCensus& census) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [label, stat] : census.by_label)
    rows.push_back({label, std::to_string(stat.ops), std::to_string(stat.bytes_written)});
  return render_table({"label", "ops", "bytes_written"}, rows);
}

json gen_report(const std::string& kind, uint64_t seed, uint64_t ops,
                const TraceCensus& census) {
  json labels = json::object();
  for (const auto& [label, stat] : census.by_label)
    labels[label] = {{"ops", stat.ops}, {"bytes_written", stat.bytes_written}};
  return json{{"report_version", kReportVersion},
              {"command", "gen"},
              {"kind", kind},
              {"seed", seed},
              {"trace_ops", ops},
              {"census", std::move(labels)}};
}

json replay_report(const std::vector<std::string>& trace_files, const std::string& policy,
                   uint64_t seed, const StackConfig& cfg, const ReplayMetrics& m) {
  return json{{"report_version", kReportVersion},
              {"command", "replay"},
              {"policy", policy},
              {"seed", seed},
              {"traces", trace_files},
              {"geometry", geometry_json(cfg)},
              {"metrics", m.to_json()}};
}

std::string metrics_table(const ReplayMetrics& m) {
  std::vector<std::vector<std::string>> rows = {
      {"trace_ops", std::to_string(m.trace_ops)},
      {"verified_reads", std::to_string(m.verified_reads)},
      {"crash_checks", std::to_string(m.crash_checks)},
      {"logical_bytes_flushed", std::to_string(m.mapper.logical_bytes_flushed)},
      {"physical_bytes_appended", std::to_string(m.mapper.physical_bytes_appended)},
      {"padding_bytes", std::to_string(m.mapper.padding_bytes)},
      {"waf", fmt_double(m.waf)},
      {"gc_calls", std::to_string(m.mapper.gc_calls)},
      {"gc_bytes_moved", std::to_string(m.mapper.gc_bytes_moved)},
      {"zones_reclaimed", std::to_string(m.mapper.zones_reclaimed)},
      {"zones_reset_without_move", std::to_string(m.mapper.zones_reset_without_move)},
      {"commits", std::to_string(m.mapper.commits)},
      {"interleaving_violations", std::to_string(m.interleaving_violations)},
      {"labeled_zones", std::to_string(m.labeled_zones)},
      {"free_zones_end", std::to_string(m.end_free_zones)},
      {"conventional_bytes_written", std::to_string(m.device.conventional_bytes_written)},
  };
  return render_table({"metric", "value"}, rows);
}

CompareRow compare_row(const std::string& policy, const ReplayMetrics& m) {
  CompareRow r;
  r.policy = policy;
  r.waf = m.waf;
  r.gc_calls = m.mapper.gc_calls;
  r.bytes_moved = m.mapper.gc_bytes_moved;
  r.free_zones_end = m.end_free_zones;
  r.purity = m.labeled_zones
                 ? double(m.labeled_zones - m.interleaving_violations) / double(m.labeled_zones)
                 : 1.0;
  return r;
}

json compare_report(const std::vector<std::string>& trace_files, uint64_t seed,
                    const StackConfig& cfg, const std::vector<CompareRow>& rows) {
  json jrows = json::array();
  for (const CompareRow& r : rows)
    jrows.push_back({{"policy", r.policy},
                     {"waf", r.waf},
                     {"gc_calls", r.gc_calls},
                     {"bytes_moved", r.bytes_moved},
                     {"free_zones_end", r.free_zones_end},
                     {"purity", r.purity}});
  return json{{"report_version", kReportVersion},
              {"command", "compare"},
              {"seed", seed},
              {"traces", trace_files},
              {"geometry", geometry_json(cfg)},
              {"rows", std::move(jrows)}};
}

std::string compare_table(const std::vector<CompareRow>& rows) {
  std::vector<std::vector<std::string>> trows;
  for (const CompareRow& r : rows)
    trows.push_back({r.policy, fmt_double(r.waf), std::to_string(r.gc_calls),
                     std::to_string(r.bytes_moved), std::to_string(r.free_zones_end),
                     fmt_double(r.purity)});
  return render_table({"policy", "waf", "gc_calls", "bytes_moved", "free_zones_end", "purity"},
                      trows);
}

}  // namespace valet::report
