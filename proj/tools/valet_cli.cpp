// Command-line driver: trace generation, policy replay, crash sweeps,
// policy comparison, and offline metadata inspection.
//
// Exit codes: 0 success, 1 verification/consistency failure, 2 usage or
// configuration error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "valet/errors.hpp"
#include "valet/fsck.hpp"
#include "valet/meta_store.hpp"
#include "valet/replay.hpp"
#include "valet/report.hpp"
#include "valet/trace.hpp"
#include "valet/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace valet;

namespace {

uint64_t default_seed() {
  const char* e = std::getenv("VALET_SEED");
  if (!e || !*e) return 42;
  try {
    return std::stoull(e);
  } catch (const std::exception&) {
    throw ValetError(Errc::invalid_config, "VALET_SEED is not a number: " + std::string(e));
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValetError(Errc::io_error, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValetError(Errc::io_error, "cannot write " + path);
  out << text;
}

// Geometry and policy flags shared by `replay` and `compare`.
struct StackFlags {
  uint32_t zones = 64;
  uint64_t zone_capacity = 1 << 20;
  uint32_t block_size = 4096;
  uint32_t max_open = 14;
  uint64_t conv_bytes = 4 << 20;
  uint32_t stream_budget = 4;
  uint64_t extent_bytes = 512 * 1024;
  uint64_t flush_bytes = 512 * 1024;
  uint32_t gc_threshold = 4;
  uint64_t group_quantum = 0;
  bool hint_only = false;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--zones", zones, "zone count")->capture_default_str();
    cmd.add_option("--zone-capacity", zone_capacity, "bytes per zone")->capture_default_str();
    cmd.add_option("--block-size", block_size, "append granularity")->capture_default_str();
    cmd.add_option("--max-open", max_open, "device open-zone limit")->capture_default_str();
    cmd.add_option("--conv-bytes", conv_bytes, "conventional region size")
        ->capture_default_str();
    cmd.add_option("--stream-budget", stream_budget, "zones the mapper keeps open")
        ->capture_default_str();
    cmd.add_option("--extent-bytes", extent_bytes, "buffer slot / max extent size")
        ->capture_default_str();
    cmd.add_option("--flush-bytes", flush_bytes, "auto-flush threshold")
        ->capture_default_str();
    cmd.add_option("--gc-threshold", gc_threshold, "free-zone floor for reclamation")
        ->capture_default_str();
    cmd.add_option("--group-quantum", group_quantum,
                   "bytes per stream before the group id advances (0 = off)")
        ->capture_default_str();
    cmd.add_flag("--hint-only", hint_only,
                 "resolve placement to kernel hint classes instead of raw streams");
  }

  StackConfig build(const std::string& policy, const std::string& rules_text,
                    const std::string& meta_dir) const {
    StackConfig cfg;
    cfg.device.zone_count = zones;
    cfg.device.zone_capacity = zone_capacity;
    cfg.device.block_size = block_size;
    cfg.device.max_open_zones = max_open;
    cfg.device.conventional_bytes = conv_bytes;
    cfg.mapper.stream_budget = stream_budget;
    cfg.mapper.max_extent_bytes = extent_bytes;
    cfg.mapper.extent_flush_bytes = flush_bytes;
    cfg.mapper.gc_free_zone_threshold = gc_threshold;
    cfg.placement = make_policy(policy, rules_text, stream_budget);
    cfg.placement.group_quantum_bytes = group_quantum;
    if (hint_only) cfg.vfs.mode = VfsMode::kHintOnly;
    cfg.meta_dir = meta_dir;
    return cfg;
  }
};

// Picks the placement rules for a trace: an explicit file wins, then a named
// built-in, then inference from the trace's own paths.
std::string resolve_rules(const std::string& rules_file, const std::string& ruleset,
                          const std::vector<std::vector<TraceOp>>& traces) {
  if (!rules_file.empty()) return read_text_file(rules_file);
  if (ruleset == "lsm") return lsm_ruleset();
  if (ruleset == "cache") return cache_ruleset();
  if (ruleset == "wt") return wt_ruleset();
  if (ruleset != "auto")
    throw ValetError(Errc::invalid_config, "unknown ruleset '" + ruleset + "'");
  if (traces.size() == 1) {
    for (const TraceOp& op : traces[0]) {
      if (op.path.empty()) continue;
      if (op.path.rfind("wal/", 0) == 0 || op.path.rfind("sst/", 0) == 0)
        return lsm_ruleset();
      if (op.path.rfind("cache/", 0) == 0) return cache_ruleset();
      if (op.path.rfind("wt/", 0) == 0) return wt_ruleset();
    }
  }
  throw ValetError(Errc::invalid_config,
                   "cannot infer a ruleset for this trace; pass --rules or --ruleset");
}

// Temp metadata directory unless the caller pinned one.
struct MetaDir {
  std::string path;
  bool owned = false;

  explicit MetaDir(const std::string& pinned) {
    if (!pinned.empty()) {
      path = pinned;
    } else {
      static int seq = 0;
      path = (fs::temp_directory_path() /
              ("valet_cli_" + std::to_string(::getpid()) + "_" + std::to_string(seq++)))
                 .string();
      owned = true;
    }
    fs::create_directories(path);
  }
  ~MetaDir() {
    if (owned) {
      std::error_code ec;
      fs::remove_all(path, ec);
    }
  }
};

struct GenArgs {
  std::string kind;
  std::string out;
  uint64_t seed = 0;
  std::string report_file;
  LsmTraceParams lsm;
  CacheTraceParams cache;
  WtTraceParams wt;
  uint64_t ops = 100000;
};

int run_gen(const GenArgs& a) {
  std::vector<TraceOp> trace;
  if (a.kind == "lsm") {
    auto p = a.lsm;
    p.op_count = a.ops;
    trace = gen_lsm_trace(p, a.seed);
  } else if (a.kind == "cache") {
    auto p = a.cache;
    p.op_count = a.ops;
    trace = gen_cache_trace(p, a.seed);
  } else {
    auto p = a.wt;
    p.op_count = a.ops;
    trace = gen_wt_trace(p, a.seed);
  }
  write_trace(a.out, trace);
  TraceCensus c = census(trace);
  std::cout << "wrote " << trace.size() << " ops to " << a.out << "\n\n"
            << report::census_table(c);
  if (!a.report_file.empty())
    write_text_file(a.report_file, report::gen_report(a.kind, a.seed, trace.size(), c).dump(2) + "\n");
  return 0;
}

struct ReplayArgs {
  std::vector<std::string> trace_files;
  std::string policy = "valet";
  std::string rules_file;
  std::string ruleset = "auto";
  uint64_t seed = 0;
  std::vector<uint64_t> crash_at;
  uint64_t crash_sweep = 0;
  std::string report_file;
  std::string meta_dir;
  std::string snapshot_out;
  bool no_verify = false;
  StackFlags stack;
};

int run_replay(const ReplayArgs& a) {
  std::vector<std::vector<TraceOp>> traces;
  uint64_t total_ops = 0;
  for (const std::string& f : a.trace_files) {
    traces.push_back(read_trace(f));
    total_ops += traces.back().size();
  }
  std::string rules = resolve_rules(a.rules_file, a.ruleset, traces);

  MetaDir meta(a.meta_dir);
  StackConfig cfg = a.stack.build(a.policy, rules, meta.path);
  Stack stack(cfg);

  ReplayOptions opts;
  opts.verify_reads = !a.no_verify;
  opts.crash_points = a.crash_at;
  if (a.crash_sweep) {
    auto spread = spread_crash_points(total_ops, a.crash_sweep, a.seed);
    opts.crash_points.insert(opts.crash_points.end(), spread.begin(), spread.end());
  }

  ReplayMetrics m = traces.size() == 1 ? replay(traces[0], stack, opts)
                                       : replay_multi(traces, stack, opts);

  std::cout << report::metrics_table(m);
  if (!a.report_file.empty())
    write_text_file(a.report_file,
                    report::replay_report(a.trace_files, a.policy, a.seed, cfg, m).dump(2) + "\n");
  if (!a.snapshot_out.empty())
    write_text_file(a.snapshot_out, fsck::device_snapshot_json(*stack.device).dump(2) + "\n");
  return 0;
}

struct CompareArgs {
  std::vector<std::string> trace_files;
  std::vector<std::string> policies = {"valet", "valet-learn", "single", "temp4"};
  std::string rules_file;
  std::string ruleset = "auto";
  uint64_t seed = 0;
  std::string out_file;
  StackFlags stack;
};

int run_compare(const CompareArgs& a) {
  std::vector<std::vector<TraceOp>> traces;
  for (const std::string& f : a.trace_files) traces.push_back(read_trace(f));
  std::string rules = resolve_rules(a.rules_file, a.ruleset, traces);

  std::vector<report::CompareRow> rows;
  StackConfig last_cfg;
  for (const std::string& policy : a.policies) {
    MetaDir meta("");
    StackConfig cfg = a.stack.build(policy, rules, meta.path);
    Stack stack(cfg);
    ReplayMetrics m = traces.size() == 1 ? replay(traces[0], stack, {})
                                         : replay_multi(traces, stack, {});
    rows.push_back(report::compare_row(policy, m));
    last_cfg = cfg;
  }

  std::cout << report::compare_table(rows);
  if (!a.out_file.empty())
    write_text_file(a.out_file,
                    report::compare_report(a.trace_files, a.seed, last_cfg, rows).dump(2) + "\n");
  return 0;
}

int run_dumpmeta(const std::string& meta_dir) {
  auto st = MetaStore(meta_dir).load();
  if (!st) {
    std::cout << "{}\n";
    return 0;
  }
  std::cout << st->dump(2) << "\n";
  return 0;
}

int run_fsck(const std::string& meta_dir, const std::string& snapshot_file,
             const std::string& json_out) {
  auto st = MetaStore(meta_dir).load();
  fsck::FsckReport rep;
  if (st) {
    if (!snapshot_file.empty())
      rep = fsck::fsck_metadata(*st, json::parse(read_text_file(snapshot_file)));
    else
      rep = fsck::fsck_metadata(*st);
  }
  std::cout << rep.to_text();
  if (!json_out.empty()) write_text_file(json_out, rep.to_json().dump(2) + "\n");
  return rep.clean() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zoned-storage placement stack: trace generation, replay, and inspection"};
  app.require_subcommand(1);

  GenArgs gen;
  ReplayArgs rep;
  CompareArgs cmp;
  std::string dump_dir, fsck_dir, fsck_snapshot, fsck_json;

  try {
    gen.seed = rep.seed = cmp.seed = default_seed();
  } catch (const ValetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App* g = app.add_subcommand("gen", "generate a workload-shaped trace");
  g->add_option("kind", gen.kind, "trace shape")
      ->required()
      ->check(CLI::IsMember({"lsm", "cache", "wt"}));
  g->add_option("--ops", gen.ops, "operation count")->capture_default_str();
  g->add_option("--seed", gen.seed, "generator seed (VALET_SEED overrides the default)")
      ->capture_default_str();
  g->add_option("--out", gen.out, "output trace file (.gz compresses)")->required();
  g->add_option("--report", gen.report_file, "write a census report JSON");
  // lsm shape
  g->add_option("--key-size", gen.lsm.key_size)->capture_default_str();
  g->add_option("--value-size", gen.lsm.value_size)->capture_default_str();
  g->add_option("--wal-segment-bytes", gen.lsm.wal_segment_bytes)->capture_default_str();
  g->add_option("--wal-fsync-every", gen.lsm.wal_fsync_every)->capture_default_str();
  g->add_option("--fifo-retention", gen.lsm.fifo_retention)->capture_default_str();
  g->add_option("--sst-bytes", gen.lsm.sst_bytes)->capture_default_str();
  g->add_option("--sst-chunk-bytes", gen.lsm.sst_chunk_bytes)->capture_default_str();
  g->add_option("--compaction-fan-in", gen.lsm.compaction_fan_in)->capture_default_str();
  g->add_option("--l1-retention", gen.lsm.l1_retention)->capture_default_str();
  // cache shape
  g->add_option("--small-object-bytes", gen.cache.small_object_bytes)->capture_default_str();
  g->add_option("--small-region-bytes", gen.cache.small_region_bytes)->capture_default_str();
  g->add_option("--small-regions-retained", gen.cache.small_regions_retained)
      ->capture_default_str();
  g->add_option("--large-object-bytes", gen.cache.large_object_bytes)->capture_default_str();
  g->add_option("--large-chunk-bytes", gen.cache.large_chunk_bytes)->capture_default_str();
  g->add_option("--large-objects-retained", gen.cache.large_objects_retained)
      ->capture_default_str();
  g->add_option("--large-percent", gen.cache.large_percent)->capture_default_str();
  g->add_option("--get-percent", gen.cache.get_percent)->capture_default_str();
  // wt shape
  g->add_option("--log-bytes", gen.wt.log_bytes)->capture_default_str();
  g->add_option("--record-bytes", gen.wt.record_bytes)->capture_default_str();
  g->add_option("--checkpoint-every", gen.wt.checkpoint_every)->capture_default_str();
  g->add_option("--table-bytes", gen.wt.table_bytes)->capture_default_str();
  g->add_option("--table-chunk-bytes", gen.wt.table_chunk_bytes)->capture_default_str();
  g->add_option("--tables-retained", gen.wt.tables_retained)->capture_default_str();
  g->add_option("--read-percent", gen.wt.read_percent)->capture_default_str();

  CLI::App* r = app.add_subcommand("replay", "replay a trace against a fresh stack");
  r->add_option("--trace", rep.trace_files, "trace file (repeat for multi-tenant replay)")
      ->required();
  r->add_option("--policy", rep.policy, "valet | valet-learn | single | temp4")
      ->capture_default_str();
  r->add_option("--rules", rep.rules_file, "placement rules file");
  r->add_option("--ruleset", rep.ruleset, "built-in rules: lsm | cache | wt | auto")
      ->capture_default_str();
  r->add_option("--seed", rep.seed, "crash-sweep seed (VALET_SEED overrides the default)")
      ->capture_default_str();
  r->add_option("--crash-at", rep.crash_at, "verify crash recovery before this op (repeatable)");
  r->add_option("--crash-sweep", rep.crash_sweep, "verify N spread-out crash points");
  r->add_option("--report", rep.report_file, "write the metrics report JSON here");
  r->add_option("--meta-dir", rep.meta_dir, "persist metadata here (default: temp dir)");
  r->add_option("--snapshot-out", rep.snapshot_out, "write a device snapshot JSON for fsck");
  r->add_flag("--no-verify", rep.no_verify, "skip read verification against the oracle");
  rep.stack.add_options(*r);

  CLI::App* c = app.add_subcommand("compare", "replay one trace under several policies");
  c->add_option("--trace", cmp.trace_files, "trace file (repeatable)")->required();
  c->add_option("--policies", cmp.policies, "policies to compare")->capture_default_str();
  c->add_option("--rules", cmp.rules_file, "placement rules file");
  c->add_option("--ruleset", cmp.ruleset, "built-in rules: lsm | cache | wt | auto")
      ->capture_default_str();
  c->add_option("--seed", cmp.seed, "recorded in the report")->capture_default_str();
  c->add_option("--out", cmp.out_file, "write the comparison report JSON here");
  cmp.stack.add_options(*c);

  CLI::App* d = app.add_subcommand("dumpmeta", "pretty-print the committed metadata");
  d->add_option("--meta-dir", dump_dir, "metadata directory")->required();

  CLI::App* f = app.add_subcommand("fsck", "check committed metadata for consistency");
  f->add_option("--meta-dir", fsck_dir, "metadata directory")->required();
  f->add_option("--device-snapshot", fsck_snapshot, "device snapshot JSON to cross-check");
  f->add_option("--json", fsck_json, "write the fsck report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (g->parsed()) return run_gen(gen);
    if (r->parsed()) return run_replay(rep);
    if (c->parsed()) return run_compare(cmp);
    if (d->parsed()) return run_dumpmeta(dump_dir);
    if (f->parsed()) return run_fsck(fsck_dir, fsck_snapshot, fsck_json);
  } catch (const ValetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::verification_failure || e.code() == Errc::corrupt_metadata ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
