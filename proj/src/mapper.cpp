#include "valet/mapper.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace valet {

using nlohmann::json;

// ---------------------------------------------------------------- config --

void MapperConfig::validate(const DeviceConfig& dev) const {
  if (stream_budget == 0) throw_errc(Errc::invalid_config, "stream_budget must be positive");
  if (stream_budget > dev.max_open_zones)
    throw_errc(Errc::invalid_config, "stream_budget exceeds device max_open_zones");
  if (max_extent_bytes < dev.block_size || max_extent_bytes % dev.block_size != 0)
    throw_errc(Errc::invalid_config, "max_extent_bytes must be a positive block multiple");
  if (max_extent_bytes > dev.zone_capacity)
    throw_errc(Errc::invalid_config, "max_extent_bytes exceeds zone capacity");
  if (extent_flush_bytes == 0 || extent_flush_bytes > max_extent_bytes)
    throw_errc(Errc::invalid_config, "extent_flush_bytes must be in (0, max_extent_bytes]");
  if (gc_free_zone_threshold >= dev.zone_count)
    throw_errc(Errc::invalid_config, "gc_free_zone_threshold must be below zone_count");
}

// ----------------------------------------------------------- buffer pool --

BufferPool::BufferPool(uint32_t count, uint64_t slot_bytes)
    : slot_bytes_(slot_bytes), count_(count) {
  if (count == 0 || slot_bytes == 0)
    throw_errc(Errc::invalid_config, "buffer pool needs at least one slot");
  arena_.resize(uint64_t(count) * slot_bytes);
  free_.reserve(count);
  for (uint32_t i = count; i > 0; --i) free_.push_back(i - 1);
}

uint32_t BufferPool::acquire() {
  if (free_.empty())
    throw_errc(Errc::buffer_pool_exhausted,
               "all " + std::to_string(count_) + " buffers in use");
  uint32_t idx = free_.back();
  free_.pop_back();
  ++in_use_;
  peak_ = std::max(peak_, in_use_);
  return idx;
}

void BufferPool::release(uint32_t idx) {
  assert(idx < count_);
  free_.push_back(idx);
  --in_use_;
}

// ---------------------------------------------------------------- mapper --

Mapper::Mapper(ZonedDevice& dev, PlacementEngine& engine, MetaStore& meta, MapperConfig cfg)
    : dev_(dev), engine_(engine), meta_(meta), cfg_(cfg) {}

Mapper::~Mapper() = default;

void Mapper::register_sidecar(const std::string& key, std::function<json()> save,
                              std::function<void(const json&)> restore) {
  sidecars_[key] = Sidecar{std::move(save), std::move(restore)};
}

void Mapper::register_commit_hook(std::function<void()> hook) {
  commit_hooks_.push_back(std::move(hook));
}

Mapper::FileRecord& Mapper::rec(Uuid u) {
  auto it = files_.find(u);
  if (it == files_.end()) throw_errc(Errc::unknown_uuid, "uuid " + std::to_string(u));
  return it->second;
}

const Mapper::FileRecord& Mapper::rec(Uuid u) const {
  auto it = files_.find(u);
  if (it == files_.end()) throw_errc(Errc::unknown_uuid, "uuid " + std::to_string(u));
  return it->second;
}

Mapper::OpenState& Mapper::open_state(Uuid u) {
  auto it = open_.find(u);
  if (it == open_.end())
    throw_errc(Errc::unknown_uuid, "uuid " + std::to_string(u) + " is not open");
  return it->second;
}

// ------------------------------------------------------------- allocator --

uint32_t Mapper::fetch_free_zone(StreamId s) {
  if (free_zones_.empty()) {
    // Allocation pressure between commit points: reclaim or die.  Reclaims
    // need a commit before the reset is safe; this is the one place a
    // commit happens mid-operation (content-equivalent to the surrounding
    // op boundary, see gc notes in the header).  Committing is safe even
    // mid-relocation: the per-extent move is atomic in memory and the
    // victim is not queued for reclaim until its step finishes.
    if (pending_reclaim_.empty()) {
      if (in_gc_)
        throw_errc(Errc::no_free_zones, "no free zone for relocation target");
      std::optional<GcStepReport> step;
      try {
        step = gc_step();
      } catch (const ValetError& e) {
        if (e.code() != Errc::no_free_zones && e.code() != Errc::gc_stall) throw;
      }
      if (!step)
        throw_errc(Errc::no_free_zones,
                   "device full: no reclaimable zone for stream " + std::to_string(s));
    }
    commit_metadata();
    if (free_zones_.empty())
      throw_errc(Errc::no_free_zones, "device full after GC for stream " + std::to_string(s));
  }
  uint32_t z = *free_zones_.begin();
  free_zones_.erase(free_zones_.begin());
  return z;
}

void Mapper::rotate_away_from(StreamId s) {
  auto it = stream_zone_.find(s);
  if (it == stream_zone_.end()) return;
  uint32_t z = it->second;
  stream_zone_.erase(it);
  ZoneState st = dev_.zone_state(z);
  if (st == ZoneState::kOpen) {
    dev_.zone_finish(z);
  } else if (st == ZoneState::kEmpty) {
    // Never written: hand it straight back.
    zones_.erase(z);
    free_zones_.insert(z);
    return;
  }
  note_zone_maybe_dead(z);
}

uint32_t Mapper::ensure_stream_zone(StreamId s, uint64_t need) {
  auto it = stream_zone_.find(s);
  if (it != stream_zone_.end()) {
    const ZoneMeta& zm = zones_.at(it->second);
    if (dev_.config().zone_capacity - zm.tail >= need) return it->second;
    rotate_away_from(s);
  }
  uint32_t z = fetch_free_zone(s);
  ZoneMeta zm;
  zm.stream = s;
  zm.tail = 0;
  zones_[z] = std::move(zm);
  stream_zone_[s] = z;
  return z;
}

std::pair<uint32_t, uint64_t> Mapper::append_raw(StreamId s, std::span<const uint8_t> bytes) {
  uint32_t z = ensure_stream_zone(s, bytes.size());
  uint64_t off = dev_.zone_append(z, bytes);
  ZoneMeta& zm = zones_.at(z);
  zm.tail = off + bytes.size();
  stats_.physical_bytes_appended += bytes.size();
  stats_.per_stream_physical[s] += bytes.size();
  if (zm.tail == dev_.config().zone_capacity) {
    // Device sealed the zone on the exact fill; rotate our bookkeeping.  No
    // deadness check here: the caller records the zone-dir entry for these
    // bytes right after we return, so the zone always ends up with at least
    // one valid extent and becomes reclaimable only via invalidate_extent.
    stream_zone_.erase(s);
  }
  return {z, off};
}

// ---------------------------------------------------------------- files --

Uuid Mapper::open_file(const FileMeta& meta) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  auto it = path_map_.find(meta.path);
  Uuid u;
  bool existing = it != path_map_.end();
  if (existing) {
    u = it->second;
  } else {
    if (!meta.create())
      throw_errc(Errc::not_found, "no such file: " + meta.path);
    u = next_uuid_++;
    // Streams are assigned once, at creation; the group at open is
    // informational (extents are tagged at flush time).
    Hint h = engine_.hint_for_open(meta);
    PlacementDirective d = resolve_zones(h);
    FileRecord f;
    f.uuid = u;
    f.stream = d.stream % cfg_.stream_budget;
    f.group_at_open = d.group;
    files_[u] = std::move(f);
    path_map_[meta.path] = u;
  }
  OpenState& os = open_[u];
  os.open_count++;
  os.writable = os.writable || meta.writable();
  if (existing && meta.writable() && meta.trunc()) truncate(u, 0);
  return u;
}

void Mapper::close_file(Uuid u, bool writable) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  OpenState& os = open_state(u);
  if (writable) flush_residue(u);
  os.open_count--;
  if (os.open_count == 0) {
    if (os.buf) pool_->release(*os.buf);
    open_.erase(u);
  }
  if (writable) {
    // A writable close is a durability point, like fsync.
    gc_check();
    commit_metadata();
  }
}

bool Mapper::exists(const std::string& path) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return path_map_.count(path) > 0;
}

std::optional<Uuid> Mapper::lookup(const std::string& path) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  auto it = path_map_.find(path);
  if (it == path_map_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Mapper::list_paths() const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  std::vector<std::string> out;
  out.reserve(path_map_.size());
  for (const auto& [p, u] : path_map_) out.push_back(p);
  return out;
}

void Mapper::unlink_locked(const std::string& path) {
  auto it = path_map_.find(path);
  if (it == path_map_.end()) throw_errc(Errc::not_found, "unlink: " + path);
  Uuid u = it->second;
  FileRecord& f = files_.at(u);
  for (const auto& e : f.extents) invalidate_extent(e);
  if (auto os = open_.find(u); os != open_.end()) {
    if (os->second.buf) pool_->release(*os->second.buf);
    open_.erase(os);
  }
  path_map_.erase(it);
  files_.erase(u);
}

void Mapper::unlink(const std::string& path) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  unlink_locked(path);
  gc_check();
  commit_metadata();  // makes the invalidation durable, then resets dead zones
}

void Mapper::rename(const std::string& from, const std::string& to) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  auto it = path_map_.find(from);
  if (it == path_map_.end()) throw_errc(Errc::not_found, "rename: " + from);
  if (from == to) return;
  if (path_map_.count(to)) unlink_locked(to);
  Uuid u = it->second;
  path_map_.erase(it);
  path_map_[to] = u;
  commit_metadata();
}

// ------------------------------------------------------------ data path --

void Mapper::write(Uuid u, std::span<const uint8_t> data) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FileRecord& f = rec(u);
  OpenState& os = open_state(u);
  if (!os.writable) throw_errc(Errc::not_open_for_write, "uuid " + std::to_string(u));
  stats_.logical_bytes_written += data.size();
  engine_.note_stream_bytes(f.stream, data.size());
  size_t consumed = 0;
  while (consumed < data.size()) {
    if (!os.buf) {
      os.buf = pool_->acquire();
      os.fill = 0;
    }
    uint64_t space = cfg_.extent_flush_bytes - os.fill;
    uint64_t take = std::min<uint64_t>(space, data.size() - consumed);
    std::memcpy(pool_->data(*os.buf) + os.fill, data.data() + consumed, take);
    os.fill += take;
    f.logical_size += take;
    consumed += take;
    if (os.fill == cfg_.extent_flush_bytes) flush_extent(f, os, os.fill);
  }
}

void Mapper::flush_extent(FileRecord& f, OpenState& os, uint64_t payload_len) {
  assert(os.buf && payload_len > 0 && payload_len <= cfg_.max_extent_bytes);
  uint64_t alloc = align_up(payload_len, dev_.config().block_size);
  uint8_t* buf = pool_->data(*os.buf);
  std::memset(buf + payload_len, 0, alloc - payload_len);  // deterministic padding
  auto [zone, off] = append_raw(f.stream, std::span<const uint8_t>(buf, alloc));
  GroupId g = engine_.group_for_flush(f.stream);

  f.extents.push_back(ExtentRec{zone, off, alloc, payload_len, g, false});
  f.durable_size += payload_len;

  ZoneMeta& zm = zones_.at(zone);
  zm.entries.push_back(ZoneDirEntry{off, alloc, f.uuid, g, false, true});
  zm.valid_count++;

  stats_.logical_bytes_flushed += payload_len;
  stats_.padding_bytes += alloc - payload_len;
  os.fill = 0;
}

void Mapper::flush_residue(Uuid u) {
  FileRecord& f = rec(u);
  auto it = open_.find(u);
  if (it == open_.end()) return;
  OpenState& os = it->second;
  if (os.buf && os.fill > 0) flush_extent(f, os, os.fill);
}

void Mapper::fsync(Uuid u) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  (void)open_state(u);  // fsync needs an open handle
  flush_residue(u);
  gc_check();
  commit_metadata();
}

Bytes Mapper::read(Uuid u, uint64_t offset, uint64_t len) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FileRecord& f = rec(u);
  if (offset + len > f.logical_size)
    throw_errc(Errc::out_of_range, "read past EOF: uuid " + std::to_string(u) + " [" +
                                       std::to_string(offset) + "," +
                                       std::to_string(offset + len) + ") size " +
                                       std::to_string(f.logical_size));
  Bytes out;
  out.reserve(len);
  uint64_t pos = offset;
  uint64_t remaining = len;
  uint64_t start = 0;
  for (const auto& e : f.extents) {
    if (remaining == 0) break;
    uint64_t end = start + e.payload;
    if (pos < end) {
      uint64_t within = pos - start;
      uint64_t take = std::min<uint64_t>(remaining, e.payload - within);
      Bytes part = read_extent_slice(e, within, take);
      out.insert(out.end(), part.begin(), part.end());
      pos += take;
      remaining -= take;
    }
    start = end;
  }
  if (remaining > 0) {
    // Buffered tail: [durable_size, logical_size).
    OpenState& os = open_state(u);
    assert(os.buf);
    uint64_t within = pos - f.durable_size;
    const uint8_t* buf = pool_->data(*os.buf);
    out.insert(out.end(), buf + within, buf + within + remaining);
  }
  return out;
}

Bytes Mapper::read_extent_slice(const ExtentRec& e, uint64_t off, uint64_t len) {
  if (const Bytes* hit = cache_get(e.zone, e.offset)) {
    stats_.read_cache_hits++;
    return Bytes(hit->begin() + off, hit->begin() + off + len);
  }
  stats_.read_cache_misses++;
  return dev_.zone_read(e.zone, e.offset + off, len);
}

void Mapper::readahead(Uuid u, uint64_t offset, uint64_t len) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FileRecord& f = rec(u);
  uint64_t end_req = std::min(offset + len, f.durable_size);
  uint64_t start = 0;
  for (const auto& e : f.extents) {
    uint64_t end = start + e.payload;
    if (end > offset && start < end_req && !cache_get(e.zone, e.offset))
      cache_put(e.zone, e.offset, dev_.zone_read(e.zone, e.offset, e.length));
    start = end;
    if (start >= end_req) break;
  }
}

void Mapper::cache_put(uint32_t zone, uint64_t offset, Bytes bytes) {
  if (cfg_.read_cache_extents == 0) return;
  while (read_cache_.size() >= cfg_.read_cache_extents) read_cache_.pop_front();
  read_cache_.push_back(CacheEntry{zone, offset, std::move(bytes)});
}

const Bytes* Mapper::cache_get(uint32_t zone, uint64_t offset) {
  for (const auto& c : read_cache_)
    if (c.zone == zone && c.offset == offset) return &c.bytes;
  return nullptr;
}

void Mapper::drop_cache_for_zone(uint32_t zone) {
  std::erase_if(read_cache_, [zone](const CacheEntry& c) { return c.zone == zone; });
}

void Mapper::truncate(Uuid u, uint64_t new_size) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FileRecord& f = rec(u);
  if (new_size > f.logical_size)
    throw_errc(Errc::truncate_beyond_eof, "uuid " + std::to_string(u) + " to " +
                                              std::to_string(new_size) + " > " +
                                              std::to_string(f.logical_size));
  OpenState* os = nullptr;
  if (auto it = open_.find(u); it != open_.end()) os = &it->second;

  if (new_size >= f.durable_size) {
    // Only the buffered tail shrinks; nothing durable changes.
    uint64_t keep = new_size - f.durable_size;
    if (os && os->buf) os->fill = keep;
    f.logical_size = new_size;
    return;
  }

  if (os && os->buf) {
    pool_->release(*os->buf);
    os->buf.reset();
    os->fill = 0;
  }
  std::vector<ExtentRec> kept;
  uint64_t start = 0;
  for (auto& e : f.extents) {
    uint64_t end = start + e.payload;
    if (start >= new_size) {
      invalidate_extent(e);  // fully cut: becomes reclaimable garbage
    } else if (end <= new_size) {
      kept.push_back(e);
    } else {
      // Straddler: the physical tail beyond new_size stays on the device as
      // dead-but-valid slack (tracked separately from padding so the WAF
      // identity stays exact).
      stats_.truncate_slack_bytes += end - new_size;
      e.payload = new_size - start;
      kept.push_back(e);
    }
    start = end;
  }
  f.extents = std::move(kept);
  f.durable_size = new_size;
  f.logical_size = new_size;
}

uint64_t Mapper::size(Uuid u) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return rec(u).logical_size;
}

uint64_t Mapper::durable_size(Uuid u) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return rec(u).durable_size;
}

StreamId Mapper::stream_of(Uuid u) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return rec(u).stream;
}

std::vector<ExtentRec> Mapper::extents_of(Uuid u) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return rec(u).extents;
}

// ------------------------------------------------------------------- gc --

void Mapper::invalidate_extent(const ExtentRec& e) {
  auto zit = zones_.find(e.zone);
  if (zit == zones_.end()) return;
  ZoneMeta& zm = zit->second;
  auto eit = std::lower_bound(
      zm.entries.begin(), zm.entries.end(), e.offset,
      [](const ZoneDirEntry& d, uint64_t off) { return d.offset < off; });
  assert(eit != zm.entries.end() && eit->offset == e.offset && eit->uuid != 0);
  if (eit != zm.entries.end() && eit->offset == e.offset && eit->valid) {
    eit->valid = false;
    zm.valid_count--;
    note_zone_maybe_dead(e.zone);
  }
}

void Mapper::note_zone_maybe_dead(uint32_t zone) {
  auto it = zones_.find(zone);
  if (it == zones_.end()) return;
  if (it->second.valid_count > 0) return;
  auto cur = stream_zone_.find(it->second.stream);
  if (cur != stream_zone_.end() && cur->second == zone) return;  // still appending
  pending_reclaim_.insert(zone);
}

void Mapper::process_pending_reclaims() {
  for (uint32_t z : pending_reclaim_) {
    dev_.zone_reset(z);
    drop_cache_for_zone(z);
    zones_.erase(z);
    free_zones_.insert(z);
    stats_.zones_reclaimed++;
    if (!pending_moved_.count(z)) stats_.zones_reset_without_move++;
    pending_moved_.erase(z);
  }
  pending_reclaim_.clear();
}

std::optional<uint32_t> Mapper::pick_victim() const {
  std::optional<uint32_t> best;
  uint32_t best_count = 0;
  for (const auto& [z, zm] : zones_) {
    auto cur = stream_zone_.find(zm.stream);
    if (cur != stream_zone_.end() && cur->second == z) continue;
    if (pending_reclaim_.count(z)) continue;
    if (dev_.zone_state(z) != ZoneState::kFull) continue;  // victims are sealed zones
    if (!best || zm.valid_count < best_count) {
      best = z;
      best_count = zm.valid_count;
    }
  }
  return best;  // map order makes ties resolve to the lowest zone id
}

std::optional<GcStepReport> Mapper::gc_step() {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  auto v = pick_victim();
  if (!v) return std::nullopt;
  GcStepReport rep;
  rep.victim = *v;
  ZoneMeta& vm = zones_.at(*v);
  StreamId s = vm.stream;
  in_gc_ = true;
  try {
    for (auto& entry : vm.entries) {
      if (!entry.valid) continue;
      // Move the allocated extent verbatim (padding travels with it), into
      // the owning stream's current zone.  Group tag survives; relocated
      // extents are exempt from group-sequentiality.
      Bytes bytes = dev_.zone_read(*v, entry.offset, entry.length);
      auto [dz, doff] = append_raw(s, std::span<const uint8_t>(bytes));
      FileRecord& f = files_.at(entry.uuid);
      auto fit = std::find_if(f.extents.begin(), f.extents.end(), [&](const ExtentRec& e) {
        return e.zone == *v && e.offset == entry.offset;
      });
      assert(fit != f.extents.end());
      fit->zone = dz;
      fit->offset = doff;
      fit->relocated = true;
      ZoneMeta& dm = zones_.at(dz);
      dm.entries.push_back(ZoneDirEntry{doff, entry.length, entry.uuid, entry.group, true, true});
      dm.valid_count++;
      entry.valid = false;
      vm.valid_count--;
      rep.moved_extents++;
      rep.moved_bytes += entry.length;
      stats_.gc_bytes_moved += entry.length;
    }
  } catch (...) {
    in_gc_ = false;
    throw;  // partially relocated state is consistent; victim keeps its data
  }
  in_gc_ = false;
  pending_reclaim_.insert(*v);
  if (rep.moved_extents > 0) pending_moved_.insert(*v);
  return rep;
}

void Mapper::gc_check() {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  bool worked = false;
  while (free_zones_.size() + pending_reclaim_.size() < cfg_.gc_free_zone_threshold) {
    size_t before = free_zones_.size() + pending_reclaim_.size();
    std::optional<GcStepReport> step;
    try {
      step = gc_step();
    } catch (const ValetError& e) {
      // A proactive pass must not fail the triggering op; a jammed
      // relocation leaves a consistent partially-moved victim behind.
      if (e.code() != Errc::no_free_zones && e.code() != Errc::gc_stall) throw;
    }
    if (!step) break;  // nothing reclaimable; benign below-floor state
    worked = true;
    if (free_zones_.size() + pending_reclaim_.size() <= before)
      break;  // relocating live-only zones churns without freeing space
  }
  if (worked) stats_.gc_calls++;
}

// ------------------------------------------------------------- metadata --

json Mapper::serialize_state() const {
  json j;
  const DeviceConfig& dc = dev_.config();
  j["geometry"] = {{"zone_count", dc.zone_count},
                   {"zone_capacity", dc.zone_capacity},
                   {"block_size", dc.block_size}};
  json pm = json::object();
  for (const auto& [p, u] : path_map_) pm[p] = u;
  j["path_map"] = pm;

  json files = json::object();
  for (const auto& [u, f] : files_) {
    json extents = json::array();
    for (const auto& e : f.extents) {
      json ej = {{"zone", e.zone}, {"offset", e.offset}, {"len", e.length}, {"group", e.group}};
      if (e.payload < e.length) ej["tail"] = e.payload;
      if (e.relocated) ej["moved"] = true;
      extents.push_back(std::move(ej));
    }
    files[std::to_string(u)] = {
        {"size", f.durable_size},
        {"stream", f.stream},
        {"group_at_open", f.group_at_open},
        {"valid_tail", f.extents.empty() ? 0 : f.extents.back().payload},
        {"extents", std::move(extents)},
    };
  }
  j["files"] = std::move(files);

  json zones = json::object();
  for (const auto& [z, zm] : zones_) {
    json entries = json::array();
    std::string bitmap;
    bitmap.reserve(zm.entries.size());
    for (const auto& d : zm.entries) {
      entries.push_back({{"offset", d.offset}, {"len", d.length}, {"uuid", d.uuid},
                         {"group", d.group}, {"moved", d.relocated}});
      bitmap.push_back(d.valid ? '1' : '0');
    }
    zones[std::to_string(z)] = {
        {"stream", zm.stream}, {"extents", std::move(entries)}, {"bitmap", bitmap}};
  }
  j["zones"] = std::move(zones);

  json sz = json::object();
  for (const auto& [s, z] : stream_zone_) sz[std::to_string(s)] = z;
  j["stream_zones"] = std::move(sz);

  j["next_uuid"] = next_uuid_;
  j["counters"] = {{"logical_bytes_written", stats_.logical_bytes_written},
                   {"logical_bytes_flushed", stats_.logical_bytes_flushed},
                   {"physical_bytes_appended", stats_.physical_bytes_appended},
                   {"padding_bytes", stats_.padding_bytes},
                   {"truncate_slack_bytes", stats_.truncate_slack_bytes},
                   {"gc_calls", stats_.gc_calls},
                   {"gc_bytes_moved", stats_.gc_bytes_moved},
                   {"zones_reclaimed", stats_.zones_reclaimed},
                   {"zones_reset_without_move", stats_.zones_reset_without_move}};
  j["placement"] = engine_.state_json();
  if (!sidecars_.empty()) {
    json sc = json::object();
    for (const auto& [k, s] : sidecars_) sc[k] = s.save();
    j["sidecar"] = std::move(sc);
  }
  return j;
}

void Mapper::commit_metadata() {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  meta_.commit(serialize_state());
  stats_.commits++;
  // Only now are the queued zone resets safe: the committed state no longer
  // references any byte in them.
  process_pending_reclaims();
  for (const auto& hook : commit_hooks_) hook();
}

void Mapper::restore_state(const json& j) {
  const DeviceConfig& dc = dev_.config();
  const json& g = j.at("geometry");
  if (g.at("zone_count").get<uint32_t>() != dc.zone_count ||
      g.at("zone_capacity").get<uint64_t>() != dc.zone_capacity ||
      g.at("block_size").get<uint32_t>() != dc.block_size)
    throw_errc(Errc::device_mismatch, "metadata geometry does not match the device");

  for (auto it = j.at("path_map").begin(); it != j.at("path_map").end(); ++it)
    path_map_[it.key()] = it.value().get<Uuid>();

  for (auto it = j.at("files").begin(); it != j.at("files").end(); ++it) {
    FileRecord f;
    f.uuid = Uuid(std::stoull(it.key()));
    const json& fj = it.value();
    f.stream = fj.at("stream").get<StreamId>();
    f.group_at_open = fj.value("group_at_open", GroupId(0));
    f.durable_size = fj.at("size").get<uint64_t>();
    f.logical_size = f.durable_size;
    for (const auto& ej : fj.at("extents")) {
      ExtentRec e;
      e.zone = ej.at("zone").get<uint32_t>();
      e.offset = ej.at("offset").get<uint64_t>();
      e.length = ej.at("len").get<uint64_t>();
      e.payload = ej.value("tail", e.length);
      e.group = ej.at("group").get<GroupId>();
      e.relocated = ej.value("moved", false);
      f.extents.push_back(e);
    }
    files_[f.uuid] = std::move(f);
  }

  for (auto it = j.at("zones").begin(); it != j.at("zones").end(); ++it) {
    ZoneMeta zm;
    const json& zj = it.value();
    zm.stream = zj.at("stream").get<StreamId>();
    std::string bitmap = zj.at("bitmap").get<std::string>();
    size_t i = 0;
    for (const auto& dj : zj.at("extents")) {
      ZoneDirEntry d;
      d.offset = dj.at("offset").get<uint64_t>();
      d.length = dj.at("len").get<uint64_t>();
      d.uuid = dj.at("uuid").get<Uuid>();
      d.group = dj.value("group", GroupId(0));
      d.relocated = dj.value("moved", false);
      d.valid = i < bitmap.size() && bitmap[i] == '1';
      if (d.valid) zm.valid_count++;
      zm.entries.push_back(d);
      ++i;
    }
    zones_[uint32_t(std::stoul(it.key()))] = std::move(zm);
  }

  if (j.contains("stream_zones"))
    for (auto it = j["stream_zones"].begin(); it != j["stream_zones"].end(); ++it)
      stream_zone_[StreamId(std::stoul(it.key()))] = it.value().get<uint32_t>();

  next_uuid_ = j.at("next_uuid").get<Uuid>();
  if (j.contains("counters")) {
    const json& c = j["counters"];
    stats_.logical_bytes_written = c.value("logical_bytes_written", uint64_t(0));
    stats_.logical_bytes_flushed = c.value("logical_bytes_flushed", uint64_t(0));
    stats_.physical_bytes_appended = c.value("physical_bytes_appended", uint64_t(0));
    stats_.padding_bytes = c.value("padding_bytes", uint64_t(0));
    stats_.truncate_slack_bytes = c.value("truncate_slack_bytes", uint64_t(0));
    stats_.gc_calls = c.value("gc_calls", uint64_t(0));
    stats_.gc_bytes_moved = c.value("gc_bytes_moved", uint64_t(0));
    stats_.zones_reclaimed = c.value("zones_reclaimed", uint64_t(0));
    stats_.zones_reset_without_move = c.value("zones_reset_without_move", uint64_t(0));
  }
  if (j.contains("placement")) engine_.restore_state(j["placement"]);
  if (j.contains("sidecar"))
    for (const auto& [k, s] : sidecars_)
      if (j["sidecar"].contains(k)) s.restore(j["sidecar"][k]);
}

void Mapper::mount() {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  if (mounted_) throw_errc(Errc::invalid_config, "mount called twice");
  cfg_.validate(dev_.config());
  uint32_t buf_count =
      uint32_t(std::max<uint64_t>(1, cfg_.buffer_pool_bytes / cfg_.max_extent_bytes));
  pool_ = std::make_unique<BufferPool>(buf_count, cfg_.max_extent_bytes);

  auto st = meta_.load();
  if (st) restore_state(*st);

  // Committed *live* extents must lie below the device write pointer.  (The
  // device being ahead is normal: un-committed appends before the crash.
  // Fully invalid zones may already have been reset, so dead entries are
  // exempt.)
  for (const auto& [z, zm] : zones_) {
    uint64_t committed_end = 0;
    for (const auto& d : zm.entries)
      if (d.valid) committed_end = std::max(committed_end, d.offset + d.length);
    if (dev_.write_pointer(z) < committed_end)
      throw_errc(Errc::device_mismatch, "zone " + std::to_string(z) +
                                            " write pointer below committed extents");
  }

  // Resume per-stream append targets where the device still has the zone
  // open (or untouched); otherwise the stream rotates on its next flush.
  for (auto it = stream_zone_.begin(); it != stream_zone_.end();) {
    uint32_t z = it->second;
    ZoneState zs = dev_.zone_state(z);
    if (zones_.count(z) && (zs == ZoneState::kOpen || zs == ZoneState::kEmpty)) {
      zones_.at(z).tail = dev_.write_pointer(z);  // skip any uncommitted garbage
      ++it;
    } else {
      it = stream_zone_.erase(it);
    }
  }

  // Zones the committed state doesn't know about hold unreachable bytes:
  // wipe and free them.  Zones it knows to be fully invalid are reset too
  // (the commit that recorded them dead already happened).
  std::vector<uint32_t> dead;
  for (const auto& [z, zm] : zones_) {
    auto cur = stream_zone_.find(zm.stream);
    bool is_current = cur != stream_zone_.end() && cur->second == z;
    if (!is_current && zm.valid_count == 0) dead.push_back(z);
  }
  for (uint32_t z : dead) {
    dev_.zone_reset(z);
    zones_.erase(z);
  }
  for (uint32_t z = 0; z < dev_.config().zone_count; ++z) {
    if (zones_.count(z)) continue;
    if (dev_.zone_state(z) != ZoneState::kEmpty) dev_.zone_reset(z);
    free_zones_.insert(z);
  }
  mounted_ = true;
}

// ---------------------------------------------------------------- stats --

MapperStats Mapper::stats() const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  MapperStats s = stats_;
  s.free_zones = free_zones_.size();
  s.pending_reclaim = pending_reclaim_.size();
  s.open_files = uint32_t(open_.size());
  if (pool_) {
    s.buffer_pool_size = pool_->size();
    s.buffer_pool_in_use = pool_->in_use();
    s.buffer_pool_peak = pool_->peak();
  }
  return s;
}

std::vector<ZoneSnapshot> Mapper::zone_snapshots() const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  std::vector<ZoneSnapshot> out;
  out.reserve(zones_.size());
  for (const auto& [z, zm] : zones_) {
    ZoneSnapshot zs;
    zs.zone = z;
    zs.stream = zm.stream;
    auto cur = stream_zone_.find(zm.stream);
    zs.is_current = cur != stream_zone_.end() && cur->second == z;
    zs.entries = zm.entries;
    zs.valid_count = zm.valid_count;
    out.push_back(std::move(zs));
  }
  return out;
}

uint64_t Mapper::free_zone_count() const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return free_zones_.size();
}

}  // namespace valet
