#include "valet/replay.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <tuple>

#include "valet/util.hpp"
#include "valet/workload.hpp"

namespace valet {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Stack
// ---------------------------------------------------------------------------

namespace {

void build_rest(Stack& s) {
  s.engine = std::make_unique<PlacementEngine>(s.config.placement);
  s.meta = std::make_unique<MetaStore>(s.config.meta_dir);
  s.mapper = std::make_unique<Mapper>(*s.device, *s.engine, *s.meta, s.config.mapper);
  s.conv = std::make_unique<ConventionalStore>(*s.device, s.config.conv_align);
  // The facade registers the conventional store's sidecar and commit hook,
  // so it must exist before the mapper mounts.
  s.vfs = std::make_unique<VfsFacade>(*s.mapper, *s.conv, *s.engine, s.config.vfs);
  s.mapper->mount();
}

}  // namespace

Stack::Stack(const StackConfig& cfg) : config(cfg) {
  device = std::make_unique<ZonedDevice>(cfg.device);
  build_rest(*this);
}

Stack::Stack(const StackConfig& cfg, std::unique_ptr<ZonedDevice> existing) : config(cfg) {
  device = std::move(existing);
  build_rest(*this);
}

PlacementConfig make_policy(const std::string& name, const std::string& rules_text,
                            uint32_t stream_budget) {
  PlacementConfig pc;
  if (name == "valet") {
    pc.mode = PlacementConfig::Mode::kHeuristic;
    pc.rules = RuleSet::parse(rules_text);
    return pc;
  }
  if (name == "valet-learn") {
    pc.mode = PlacementConfig::Mode::kLearned;
    pc.k = stream_budget;
    return pc;
  }
  if (name == "single") {
    pc.mode = PlacementConfig::Mode::kHeuristic;
    pc.rules = RuleSet::parse("default -> 0\n");
    return pc;
  }
  if (name == "temp4") {
    // Same classifier, collapsed onto the 4 kernel hint classes: every rule
    // target is folded mod 4, exactly what the multi-stream resolver does.
    std::string folded;
    size_t pos = 0;
    while (pos <= rules_text.size()) {
      size_t nl = rules_text.find('\n', pos);
      std::string line = rules_text.substr(pos, nl == std::string::npos ? nl : nl - pos);
      size_t arrow = line.find("->");
      if (arrow != std::string::npos) {
        uint32_t target = std::stoul(line.substr(arrow + 2));
        line = line.substr(0, arrow + 2) + " " + std::to_string(target % 4);
      }
      folded += line;
      folded += '\n';
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
    pc.mode = PlacementConfig::Mode::kHeuristic;
    pc.rules = RuleSet::parse(folded);
    return pc;
  }
  throw ValetError(Errc::invalid_config, "unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// ShadowOracle
// ---------------------------------------------------------------------------

ShadowOracle::ShadowOracle(uint64_t extent_flush_bytes, uint64_t conv_align)
    : flush_bytes_(extent_flush_bytes), conv_align_(conv_align) {}

ShadowOracle::OFile& ShadowOracle::live(const std::string& path) {
  auto it = live_.find(path);
  if (it == live_.end()) throw ValetError(Errc::bad_trace, "oracle: unknown file " + path);
  return it->second;
}

const ShadowOracle::OFile& ShadowOracle::live(const std::string& path) const {
  auto it = live_.find(path);
  if (it == live_.end()) throw ValetError(Errc::bad_trace, "oracle: unknown file " + path);
  return it->second;
}

Bytes& ShadowOracle::mut(OFile& f) {
  if (f.content.use_count() > 1) f.content = std::make_shared<Bytes>(*f.content);
  return *f.content;
}

void ShadowOracle::on_open(const std::string& path, uint32_t flags, bool mapper_route) {
  auto it = live_.find(path);
  if (it == live_.end()) {
    if (!(flags & kOfCreate)) throw ValetError(Errc::bad_trace, "oracle: open missing " + path);
    OFile f;
    f.mapper_backed = mapper_route;
    f.capacity = mapper_route ? 0 : conv_align_;
    f.open_writable = (flags & kOfWrite) != 0;
    live_.emplace(path, std::move(f));
    return;
  }
  OFile& f = it->second;
  if (f.mapper_backed != mapper_route)
    throw ValetError(Errc::bad_trace, "oracle: route flapped for " + path);
  if (flags & kOfWrite) f.open_writable = true;
  if (flags & kOfTrunc) on_truncate(path, 0);
}

void ShadowOracle::on_append(const std::string& path, std::span<const uint8_t> data) {
  OFile& f = live(path);
  if (f.mapper_backed) {
    Bytes& c = mut(f);
    c.insert(c.end(), data.begin(), data.end());
    f.size += data.size();
    while (f.size - f.flushed >= flush_bytes_) f.flushed += flush_bytes_;
    return;
  }
  on_pwrite(path, f.size, data);
}

void ShadowOracle::on_pwrite(const std::string& path, uint64_t offset,
                             std::span<const uint8_t> data) {
  OFile& f = live(path);
  if (f.mapper_backed) {
    if (offset != f.size)
      throw ValetError(Errc::bad_trace, "oracle: non-append write on zone file " + path);
    on_append(path, data);
    return;
  }
  uint64_t end = offset + data.size();
  if (end > f.capacity) {
    // Region move: the committed region stops receiving in-place updates,
    // so capture the image recovery will read from it.
    if (f.committed && !f.realloc_since_commit) {
      f.frozen = std::make_shared<Bytes>(f.content->begin(),
                                         f.content->begin() + static_cast<long>(f.committed_size));
      f.realloc_since_commit = true;
    }
    uint64_t cap = std::max(f.capacity, conv_align_);
    while (cap < end) cap *= 2;
    f.capacity = cap;
  }
  Bytes& c = mut(f);
  if (offset > f.size) c.resize(offset, 0);  // hole reads as zeros
  if (c.size() < end) c.resize(end);
  std::copy(data.begin(), data.end(), c.begin() + static_cast<long>(offset));
  f.size = std::max(f.size, end);
}

void ShadowOracle::on_truncate(const std::string& path, uint64_t new_size) {
  OFile& f = live(path);
  if (new_size > f.size)
    throw ValetError(Errc::bad_trace, "oracle: truncate beyond EOF on " + path);
  mut(f).resize(new_size);
  f.size = new_size;
  if (f.mapper_backed && f.flushed > new_size) f.flushed = new_size;
}

void ShadowOracle::on_unlink(const std::string& path) {
  live(path);
  live_.erase(path);
}

void ShadowOracle::on_rename(const std::string& from, const std::string& to) {
  OFile f = std::move(live(from));
  live_.erase(from);
  live_[to] = std::move(f);
}

void ShadowOracle::on_flush(const std::string& path) {
  OFile& f = live(path);
  if (f.mapper_backed) f.flushed = f.size;
}

void ShadowOracle::on_commit() {
  ++commits_;
  durable_.clear();
  for (auto& [path, f] : live_) {
    DurableFile d;
    d.mapper_backed = f.mapper_backed;
    d.content = f.content;
    d.len = f.mapper_backed ? f.flushed : f.size;
    durable_.emplace(path, std::move(d));
    if (!f.mapper_backed) {
      f.committed_size = f.size;
      f.realloc_since_commit = false;
      f.frozen.reset();
    }
    f.committed = true;
  }
}

uint64_t ShadowOracle::live_size(const std::string& path) const { return live(path).size; }

Bytes ShadowOracle::expected_read(const std::string& path, uint64_t offset, uint64_t len) const {
  const OFile& f = live(path);
  if (offset + len > f.size)
    throw ValetError(Errc::bad_trace, "oracle: read past EOF on " + path);
  return Bytes(f.content->begin() + static_cast<long>(offset),
               f.content->begin() + static_cast<long>(offset + len));
}

std::map<std::string, ShadowOracle::CrashFile> ShadowOracle::crash_image() const {
  std::map<std::string, CrashFile> out;
  for (const auto& [path, d] : durable_) {
    CrashFile cf;
    cf.mapper_backed = d.mapper_backed;
    if (d.mapper_backed) {
      // Committed metadata exposes exactly the flushed prefix of that commit.
      cf.content.assign(d.content->begin(), d.content->begin() + static_cast<long>(d.len));
    } else {
      // In-place files: post-commit overwrites persist (they hit the device
      // synchronously), unless a region move left the committed region
      // frozen.  Size always rolls back to the committed size.
      const OFile& f = live(path);
      if (f.size < f.committed_size)
        throw ValetError(Errc::bad_trace,
                         "oracle: conventional truncate between commits is outside "
                         "the crash model (" +
                             path + ")");
      const Bytes& src = f.realloc_since_commit ? *f.frozen : *f.content;
      cf.content.assign(src.begin(), src.begin() + static_cast<long>(f.committed_size));
    }
    out.emplace(path, std::move(cf));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

namespace {

struct FdState {
  int facade_fd = -1;
  std::string path;
  bool mapper_route = false;
  bool writable = false;
};

[[noreturn]] void fail_verify(uint64_t seq, const std::string& what) {
  throw ValetError(Errc::verification_failure, "op " + std::to_string(seq) + ": " + what);
}

// Recover a throwaway stack from a clone of the device and a copy of the
// metadata directory, then require it to match the oracle's crash image
// exactly, in both directions.
void verify_crash_point(Stack& s, const ShadowOracle& oracle, uint64_t seq) {
  namespace fs = std::filesystem;
  std::string dir2 = s.config.meta_dir + ".crashck";
  fs::remove_all(dir2);
  fs::create_directories(dir2);
  fs::copy(s.config.meta_dir, dir2, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  StackConfig cfg2 = s.config;
  cfg2.meta_dir = dir2;
  Stack rec(cfg2, s.device->clone());

  auto image = oracle.crash_image();
  size_t matched = 0;
  for (const auto& path : rec.mapper->list_paths()) {
    auto it = image.find(path);
    if (it == image.end()) fail_verify(seq, "recovery resurrected uncommitted file " + path);
    if (!it->second.mapper_backed) fail_verify(seq, "route mismatch after recovery: " + path);
    Uuid u = *rec.mapper->lookup(path);
    uint64_t sz = rec.mapper->size(u);
    if (sz != it->second.content.size())
      fail_verify(seq, path + ": recovered size " + std::to_string(sz) + " != committed " +
                           std::to_string(it->second.content.size()));
    if (sz > 0 && rec.mapper->read(u, 0, sz) != it->second.content)
      fail_verify(seq, path + ": recovered bytes differ from committed bytes");
    ++matched;
  }
  for (const auto& path : rec.conv->list_paths()) {
    auto it = image.find(path);
    if (it == image.end()) fail_verify(seq, "recovery resurrected uncommitted file " + path);
    if (it->second.mapper_backed) fail_verify(seq, "route mismatch after recovery: " + path);
    uint64_t sz = rec.conv->size(path);
    if (sz != it->second.content.size())
      fail_verify(seq, path + ": recovered size " + std::to_string(sz) + " != committed " +
                           std::to_string(it->second.content.size()));
    if (sz > 0 && rec.conv->read(path, 0, sz) != it->second.content)
      fail_verify(seq, path + ": recovered bytes differ from committed bytes");
    ++matched;
  }
  if (matched != image.size())
    fail_verify(seq, "recovery lost committed files: recovered " + std::to_string(matched) +
                         " of " + std::to_string(image.size()));

  // Recovered counters must still satisfy the accounting identity.
  MapperStats ms = rec.mapper->stats();
  if (ms.physical_bytes_appended !=
      ms.logical_bytes_flushed + ms.padding_bytes + ms.gc_bytes_moved)
    fail_verify(seq, "accounting identity broken after recovery");
  fs::remove_all(dir2);
}

// Returns {zones holding >1 reference label, zones holding >=1 labeled extent}.
std::pair<uint64_t, uint64_t> count_interleaving_violations(
    const Stack& s, const std::map<std::string, std::string>& label_of) {
  std::map<Uuid, std::string> uuid_label;
  for (const auto& path : s.mapper->list_paths()) {
    auto u = s.mapper->lookup(path);
    if (!u) continue;
    auto it = label_of.find(path);
    uuid_label[*u] = it != label_of.end() ? it->second : std::string("-");
  }
  uint64_t violations = 0, labeled = 0;
  for (const auto& zs : s.mapper->zone_snapshots()) {
    std::set<std::string> labels;
    for (const auto& e : zs.entries) {
      if (!e.valid) continue;
      auto it = uuid_label.find(e.uuid);
      labels.insert(it != uuid_label.end() ? it->second : std::string("-"));
    }
    if (!labels.empty()) ++labeled;
    if (labels.size() > 1) ++violations;
  }
  return {violations, labeled};
}

}  // namespace

ReplayMetrics replay(const std::vector<TraceOp>& trace, Stack& stack, const ReplayOptions& opts) {
  VfsFacade& vfs = *stack.vfs;
  ShadowOracle oracle(stack.config.mapper.extent_flush_bytes, stack.config.conv_align);

  std::map<int64_t, FdState> fds;
  std::map<std::string, std::string> label_of;
  uint64_t expected_commits = 0;
  ReplayMetrics m;
  m.trace_ops = trace.size();

  std::vector<uint64_t> crash_points = opts.crash_points;
  std::sort(crash_points.begin(), crash_points.end());
  auto next_crash = crash_points.begin();

  auto fd_state = [&](const TraceOp& op) -> FdState& {
    auto it = fds.find(op.fd);
    if (it == fds.end())
      throw ValetError(Errc::bad_trace, "op " + std::to_string(op.seq) + ": unknown fd " +
                                            std::to_string(op.fd));
    return it->second;
  };
  auto require_closed = [&](const std::string& path, const TraceOp& op) {
    for (const auto& [tfd, st] : fds)
      if (st.path == path)
        throw ValetError(Errc::bad_trace, "op " + std::to_string(op.seq) +
                                              ": namespace op on open file " + path);
  };

  for (const TraceOp& op : trace) {
    while (next_crash != crash_points.end() && *next_crash <= op.seq) {
      verify_crash_point(stack, oracle, *next_crash);
      ++m.crash_checks;
      ++next_crash;
    }

    if (op.op == "open") {
      bool mmap_writable = (op.flags & kTfMmapWritable) != 0;
      uint32_t flags = op.flags & ~kTfMmapWritable;
      int fd = mmap_writable ? vfs.f_mmap_open(op.path, true)
                             : vfs.f_open(op.path, flags, op.size);
      bool mapper_route = !vfs.fd_info(fd).passthrough;
      bool writable = mmap_writable || (flags & kOfWrite) != 0;
      fds[op.fd] = FdState{fd, op.path, mapper_route, writable};
      oracle.on_open(op.path, flags | (mmap_writable ? (kOfWrite | kOfCreate) : 0u),
                     mapper_route);
      if (!op.label.empty()) label_of.emplace(op.path, op.label);
    } else if (op.op == "write") {
      FdState& st = fd_state(op);
      Bytes data = synth_payload(op.data_seed, op.size);
      if (op.offset < 0) {
        vfs.f_write(st.facade_fd, data);
        oracle.on_append(st.path, data);
      } else {
        vfs.f_pwrite(st.facade_fd, data, static_cast<uint64_t>(op.offset));
        oracle.on_pwrite(st.path, static_cast<uint64_t>(op.offset), data);
      }
    } else if (op.op == "read") {
      FdState& st = fd_state(op);
      uint64_t offset = op.offset < 0 ? 0 : static_cast<uint64_t>(op.offset);
      Bytes got = vfs.f_read(st.facade_fd, offset, op.size);
      if (opts.verify_reads) {
        Bytes want = oracle.expected_read(st.path, offset, op.size);
        if (got != want)
          fail_verify(op.seq, st.path + ": read [" + std::to_string(offset) + "," +
                                  std::to_string(offset + op.size) +
                                  ") returned bytes that differ from the oracle");
        ++m.verified_reads;
      }
    } else if (op.op == "fsync") {
      FdState& st = fd_state(op);
      vfs.f_fsync(st.facade_fd);
      if (st.writable && st.mapper_route) oracle.on_flush(st.path);
      oracle.on_commit();
      ++expected_commits;
    } else if (op.op == "close") {
      FdState& st = fd_state(op);
      vfs.f_close(st.facade_fd);
      if (st.writable) {
        if (st.mapper_route) oracle.on_flush(st.path);
        oracle.on_commit();
        ++expected_commits;
      }
      fds.erase(op.fd);
    } else if (op.op == "truncate") {
      FdState& st = fd_state(op);
      vfs.f_truncate(st.facade_fd, op.size);
      oracle.on_truncate(st.path, op.size);
    } else if (op.op == "unlink") {
      require_closed(op.path, op);
      vfs.f_unlink(op.path);
      oracle.on_unlink(op.path);
      oracle.on_commit();
      ++expected_commits;
      label_of.erase(op.path);
    } else if (op.op == "rename") {
      require_closed(op.path, op);
      require_closed(op.path2, op);
      // Cross-backend replace of a zone-backed target commits twice.
      bool from_mapper = stack.mapper->exists(op.path);
      bool to_mapper = stack.mapper->exists(op.path2);
      expected_commits += (!from_mapper && to_mapper) ? 2 : 1;
      vfs.f_rename(op.path, op.path2);
      oracle.on_rename(op.path, op.path2);
      oracle.on_commit();
      if (auto it = label_of.find(op.path); it != label_of.end()) {
        label_of[op.path2] = it->second;
        label_of.erase(it);
      }
    } else {
      throw ValetError(Errc::bad_trace,
                       "op " + std::to_string(op.seq) + ": unhandled op " + op.op);
    }
  }
  while (next_crash != crash_points.end()) {
    verify_crash_point(stack, oracle, *next_crash);
    ++m.crash_checks;
    ++next_crash;
  }

  m.mapper = stack.mapper->stats();
  m.device = stack.device->counters();
  m.end_free_zones = m.mapper.free_zones;
  std::tie(m.interleaving_violations, m.labeled_zones) =
      count_interleaving_violations(stack, label_of);
  m.waf = m.mapper.logical_bytes_flushed
              ? double(m.mapper.physical_bytes_appended) / double(m.mapper.logical_bytes_flushed)
              : 0.0;

  // The accounting identity must hold exactly at end of replay.
  if (m.mapper.physical_bytes_appended !=
      m.mapper.logical_bytes_flushed + m.mapper.padding_bytes + m.mapper.gc_bytes_moved)
    fail_verify(trace.empty() ? 0 : trace.back().seq, "accounting identity broken after replay");

  // Crash checks assume every commit is one we mirrored; allocation-pressure
  // commits inside an op would make the oracle lag reality.
  if (!crash_points.empty() && m.mapper.commits != expected_commits)
    fail_verify(trace.empty() ? 0 : trace.back().seq,
                "unmirrored commits during crash replay (expected " +
                    std::to_string(expected_commits) + ", observed " +
                    std::to_string(m.mapper.commits) + "): geometry too tight for the trace");

  return m;
}

ReplayMetrics replay_multi(const std::vector<std::vector<TraceOp>>& traces, Stack& stack,
                           const ReplayOptions& opts) {
  std::vector<std::vector<TraceOp>> prefixed;
  prefixed.reserve(traces.size());
  for (size_t i = 0; i < traces.size(); ++i)
    prefixed.push_back(prefix_tenant(traces[i], "t" + std::to_string(i)));
  return replay(merge_traces(prefixed), stack, opts);
}

std::vector<uint64_t> spread_crash_points(uint64_t trace_len, uint64_t count, uint64_t seed) {
  std::set<uint64_t> points;
  if (trace_len > 1) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<uint64_t> dist(1, trace_len - 1);
    uint64_t attempts = 0;
    while (points.size() < count && attempts < count * 64 + 1024) {
      points.insert(dist(rng));
      ++attempts;
    }
  }
  return std::vector<uint64_t>(points.begin(), points.end());
}

json ReplayMetrics::to_json() const {
  json per_stream = json::object();
  for (const auto& [s, b] : mapper.per_stream_physical) per_stream[std::to_string(s)] = b;
  return json{
      {"trace_ops", trace_ops},
      {"verified_reads", verified_reads},
      {"crash_checks", crash_checks},
      {"interleaving_violations", interleaving_violations},
      {"labeled_zones", labeled_zones},
      {"end_free_zones", end_free_zones},
      {"waf", waf},
      {"logical_bytes_written", mapper.logical_bytes_written},
      {"logical_bytes_flushed", mapper.logical_bytes_flushed},
      {"physical_bytes_appended", mapper.physical_bytes_appended},
      {"padding_bytes", mapper.padding_bytes},
      {"truncate_slack_bytes", mapper.truncate_slack_bytes},
      {"gc_calls", mapper.gc_calls},
      {"gc_bytes_moved", mapper.gc_bytes_moved},
      {"zones_reclaimed", mapper.zones_reclaimed},
      {"zones_reset_without_move", mapper.zones_reset_without_move},
      {"commits", mapper.commits},
      {"per_stream_physical", per_stream},
      {"device",
       {{"bytes_appended", device.bytes_appended},
        {"bytes_read", device.bytes_read},
        {"zone_resets", device.zone_resets},
        {"zone_finishes", device.zone_finishes},
        {"conventional_bytes_written", device.conventional_bytes_written},
        {"conventional_bytes_read", device.conventional_bytes_read}}},
  };
}

}  // namespace valet
