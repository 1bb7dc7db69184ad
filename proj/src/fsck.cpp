#include "valet/fsck.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "valet/errors.hpp"

namespace valet::fsck {

using nlohmann::json;

namespace {

// Mirrors ExtentRec as persisted under files[uuid].extents[].
struct FileExtent {
  uint64_t uuid = 0;
  uint32_t zone = 0;
  uint64_t offset = 0;
  uint64_t length = 0;
  uint64_t payload = 0;
  uint32_t group = 0;
  bool moved = false;
};

// Mirrors a zone directory entry as persisted under zones[z].extents[].
struct DirEntry {
  uint64_t offset = 0;
  uint64_t length = 0;
  uint64_t uuid = 0;
  uint32_t group = 0;
  bool moved = false;
  bool valid = false;
};

class Checker {
 public:
  explicit Checker(const json& committed) : j_(committed) {}

  FsckReport run(const json* snapshot) {
    // A store that has never committed has nothing to check.
    if (j_.is_null() || (j_.is_object() && j_.empty())) return std::move(rep_);
    if (!require_schema()) return std::move(rep_);
    load_geometry();
    load_files();
    load_zones();
    check_path_map();
    check_extent_shape();
    check_file_sizes();
    check_zone_agreement();
    check_zone_overlap();
    check_stream_purity();
    check_group_order();
    check_stream_zones();
    check_counters();
    check_conv_layout();
    if (snapshot) check_snapshot(*snapshot);
    return std::move(rep_);
  }

 private:
  void issue(const std::string& check, const std::string& detail) {
    rep_.issues.push_back({check, detail});
  }

  static std::string zref(uint32_t zone, uint64_t offset) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "zone %" PRIu32 " offset %" PRIu64, zone, offset);
    return buf;
  }

  bool require_schema() {
    bool ok = true;
    for (const char* key : {"geometry", "path_map", "files", "zones", "next_uuid"}) {
      if (!j_.contains(key)) {
        issue("schema", std::string("missing top-level key '") + key + "'");
        ok = false;
      }
    }
    return ok;
  }

  void load_geometry() {
    const json& g = j_["geometry"];
    zone_count_ = g.value("zone_count", uint32_t(0));
    zone_capacity_ = g.value("zone_capacity", uint64_t(0));
    block_ = g.value("block_size", uint32_t(0));
    if (zone_count_ == 0 || zone_capacity_ == 0 || block_ == 0)
      issue("geometry", "zone_count, zone_capacity and block_size must be positive");
    else if (zone_capacity_ % block_ != 0)
      issue("geometry", "zone_capacity is not a multiple of block_size");
    if (block_ == 0) block_ = 1;  // keep later modulo checks well-defined
  }

  void load_files() {
    for (auto it = j_["files"].begin(); it != j_["files"].end(); ++it) {
      uint64_t uuid = 0;
      try {
        uuid = std::stoull(it.key());
      } catch (const std::exception&) {
        issue("schema", "file key '" + it.key() + "' is not a numeric id");
        continue;
      }
      const json& fj = it.value();
      file_stream_[uuid] = fj.value("stream", uint32_t(0));
      file_size_[uuid] = fj.value("size", uint64_t(0));
      for (const json& ej : fj.value("extents", json::array())) {
        FileExtent e;
        e.uuid = uuid;
        e.zone = ej.value("zone", uint32_t(0));
        e.offset = ej.value("offset", uint64_t(0));
        e.length = ej.value("len", uint64_t(0));
        e.payload = ej.value("tail", e.length);
        e.group = ej.value("group", uint32_t(0));
        e.moved = ej.value("moved", false);
        file_extents_.push_back(e);
      }
      rep_.files++;
    }
    rep_.extents = file_extents_.size();
  }

  void load_zones() {
    for (auto it = j_["zones"].begin(); it != j_["zones"].end(); ++it) {
      uint32_t zone = 0;
      try {
        zone = uint32_t(std::stoul(it.key()));
      } catch (const std::exception&) {
        issue("schema", "zone key '" + it.key() + "' is not a numeric id");
        continue;
      }
      const json& zj = it.value();
      if (zone >= zone_count_)
        issue("zone-dir", "zone " + it.key() + " is outside the device (zone_count " +
                              std::to_string(zone_count_) + ")");
      zone_stream_[zone] = zj.value("stream", uint32_t(0));
      std::string bitmap = zj.value("bitmap", std::string());
      const json& entries = zj.value("extents", json::array());
      if (bitmap.size() != entries.size())
        issue("bitmap", "zone " + it.key() + ": bitmap length " +
                            std::to_string(bitmap.size()) + " != entry count " +
                            std::to_string(entries.size()));
      size_t i = 0;
      for (const json& dj : entries) {
        DirEntry d;
        d.offset = dj.value("offset", uint64_t(0));
        d.length = dj.value("len", uint64_t(0));
        d.uuid = dj.value("uuid", uint64_t(0));
        d.group = dj.value("group", uint32_t(0));
        d.moved = dj.value("moved", false);
        if (i < bitmap.size()) {
          if (bitmap[i] != '0' && bitmap[i] != '1')
            issue("bitmap", "zone " + it.key() + ": bitmap holds '" +
                                std::string(1, bitmap[i]) + "' at index " + std::to_string(i));
          d.valid = bitmap[i] == '1';
        }
        zone_entries_[zone].push_back(d);
        ++i;
      }
      rep_.zones_described++;
    }
  }

  void check_path_map() {
    std::map<uint64_t, std::string> owner;
    for (auto it = j_["path_map"].begin(); it != j_["path_map"].end(); ++it) {
      if (!it.value().is_number_integer() && !it.value().is_number_unsigned()) {
        issue("path-map", "path '" + it.key() + "' maps to a non-numeric id");
        continue;
      }
      uint64_t uuid = it.value().get<uint64_t>();
      if (!file_stream_.count(uuid))
        issue("path-map", "path '" + it.key() + "' points at missing file " +
                              std::to_string(uuid));
      auto [pos, inserted] = owner.emplace(uuid, it.key());
      if (!inserted)
        issue("path-map", "file " + std::to_string(uuid) + " is claimed by both '" +
                              pos->second + "' and '" + it.key() + "'");
    }
    for (const auto& [uuid, stream] : file_stream_) {
      (void)stream;
      if (!owner.count(uuid))
        issue("path-map", "file " + std::to_string(uuid) + " has no path entry");
    }
    uint64_t next_uuid = j_["next_uuid"].is_number() ? j_["next_uuid"].get<uint64_t>() : 0;
    for (const auto& [uuid, stream] : file_stream_) {
      (void)stream;
      if (uuid >= next_uuid)
        issue("path-map", "file " + std::to_string(uuid) + " is at or above next_uuid " +
                              std::to_string(next_uuid));
    }
  }

  void check_extent_shape() {
    for (const FileExtent& e : file_extents_) {
      std::string where = "file " + std::to_string(e.uuid) + " extent at " +
                          zref(e.zone, e.offset);
      if (e.zone >= zone_count_)
        issue("extent-shape", where + ": zone outside the device");
      if (e.length == 0 || e.length % block_ != 0)
        issue("extent-shape", where + ": length " + std::to_string(e.length) +
                                  " is not a positive block multiple");
      if (e.offset % block_ != 0)
        issue("extent-shape", where + ": offset is not block aligned");
      if (e.offset + e.length > zone_capacity_)
        issue("extent-shape", where + ": extends past zone capacity");
      if (e.payload == 0 || e.payload > e.length)
        issue("extent-shape", where + ": payload " + std::to_string(e.payload) +
                                  " outside (0, len]");
    }
  }

  void check_file_sizes() {
    std::map<uint64_t, uint64_t> sums;
    for (const FileExtent& e : file_extents_) sums[e.uuid] += e.payload;
    for (const auto& [uuid, size] : file_size_) {
      uint64_t sum = sums.count(uuid) ? sums[uuid] : 0;
      if (sum != size)
        issue("file-size", "file " + std::to_string(uuid) + ": extents hold " +
                               std::to_string(sum) + " bytes but size is " +
                               std::to_string(size));
    }
  }

  // Every file extent must be a *valid* zone-directory entry with identical
  // fields, and every valid directory entry must belong to exactly one file.
  void check_zone_agreement() {
    std::map<std::pair<uint32_t, uint64_t>, const DirEntry*> dir;
    for (const auto& [zone, entries] : zone_entries_)
      for (const DirEntry& d : entries) dir[{zone, d.offset}] = &d;

    std::set<std::pair<uint32_t, uint64_t>> claimed;
    for (const FileExtent& e : file_extents_) {
      std::string where = "file " + std::to_string(e.uuid) + " extent at " +
                          zref(e.zone, e.offset);
      auto it = dir.find({e.zone, e.offset});
      if (it == dir.end()) {
        issue("zone-dir", where + ": no zone directory entry (dangling extent)");
        continue;
      }
      const DirEntry& d = *it->second;
      if (!d.valid)
        issue("zone-dir", where + ": zone directory marks it invalid");
      if (d.uuid != e.uuid || d.length != e.length || d.group != e.group ||
          d.moved != e.moved)
        issue("zone-dir", where + ": zone directory disagrees (uuid " +
                              std::to_string(d.uuid) + " len " + std::to_string(d.length) +
                              " group " + std::to_string(d.group) + ")");
      if (!claimed.insert({e.zone, e.offset}).second)
        issue("zone-dir", where + ": two file extents share one zone entry");
    }
    for (const auto& [zone, entries] : zone_entries_)
      for (const DirEntry& d : entries)
        if (d.valid && !claimed.count({zone, d.offset}))
          issue("zone-dir", "valid entry at " + zref(zone, d.offset) +
                                " (file " + std::to_string(d.uuid) +
                                ") has no owning extent (orphan)");
  }

  void check_zone_overlap() {
    for (const auto& [zone, entries] : zone_entries_) {
      std::vector<std::pair<uint64_t, uint64_t>> spans;
      spans.reserve(entries.size());
      for (const DirEntry& d : entries) {
        if (d.offset % block_ != 0 || d.length == 0 || d.length % block_ != 0)
          issue("zone-overlap", "entry at " + zref(zone, d.offset) +
                                    ": misaligned or empty");
        if (d.offset + d.length > zone_capacity_)
          issue("zone-overlap", "entry at " + zref(zone, d.offset) +
                                    ": extends past zone capacity");
        spans.emplace_back(d.offset, d.length);
      }
      std::sort(spans.begin(), spans.end());
      for (size_t i = 1; i < spans.size(); ++i) {
        auto [poff, plen] = spans[i - 1];
        if (poff + plen > spans[i].first)
          issue("zone-overlap", "entries at " + zref(zone, poff) + " and " +
                                    zref(zone, spans[i].first) + " overlap");
      }
    }
  }

  void check_stream_purity() {
    for (const auto& [zone, entries] : zone_entries_) {
      uint32_t zstream = zone_stream_[zone];
      for (const DirEntry& d : entries) {
        if (!d.valid) continue;
        auto it = file_stream_.find(d.uuid);
        if (it == file_stream_.end()) continue;  // reported by zone-dir already
        if (it->second != zstream)
          issue("stream-purity", "zone " + std::to_string(zone) + " carries stream " +
                                     std::to_string(zstream) + " but file " +
                                     std::to_string(d.uuid) + " belongs to stream " +
                                     std::to_string(it->second));
      }
    }
  }

  // Within a zone, the groups of live, never-relocated extents must be
  // non-decreasing in physical order: original placement appends a zone's
  // groups in the order the placement engine issued them.
  void check_group_order() {
    for (const auto& [zone, entries] : zone_entries_) {
      std::vector<const DirEntry*> live;
      for (const DirEntry& d : entries)
        if (d.valid && !d.moved) live.push_back(&d);
      std::sort(live.begin(), live.end(),
                [](const DirEntry* a, const DirEntry* b) { return a->offset < b->offset; });
      for (size_t i = 1; i < live.size(); ++i)
        if (live[i]->group < live[i - 1]->group)
          issue("group-order", "zone " + std::to_string(zone) + ": group " +
                                   std::to_string(live[i]->group) + " at offset " +
                                   std::to_string(live[i]->offset) + " follows group " +
                                   std::to_string(live[i - 1]->group));
    }
  }

  void check_stream_zones() {
    if (!j_.contains("stream_zones")) return;
    for (auto it = j_["stream_zones"].begin(); it != j_["stream_zones"].end(); ++it) {
      uint32_t stream = 0;
      try {
        stream = uint32_t(std::stoul(it.key()));
      } catch (const std::exception&) {
        issue("schema", "stream_zones key '" + it.key() + "' is not numeric");
        continue;
      }
      uint32_t zone = it.value().is_number() ? it.value().get<uint32_t>() : zone_count_;
      if (zone >= zone_count_) {
        issue("stream-zones", "stream " + it.key() + " points at zone " +
                                  std::to_string(zone) + " outside the device");
        continue;
      }
      auto zit = zone_stream_.find(zone);
      if (zit != zone_stream_.end() && zit->second != stream)
        issue("stream-zones", "stream " + it.key() + " claims zone " +
                                  std::to_string(zone) + " but that zone carries stream " +
                                  std::to_string(zit->second));
    }
  }

  void check_counters() {
    if (!j_.contains("counters")) {
      issue("counters", "missing counters object");
      return;
    }
    const json& c = j_["counters"];
    auto val = [&](const char* k) { return c.value(k, uint64_t(0)); };
    uint64_t physical = val("physical_bytes_appended");
    uint64_t expect = val("logical_bytes_flushed") + val("padding_bytes") +
                      val("gc_bytes_moved");
    if (physical != expect)
      issue("counters", "physical_bytes_appended " + std::to_string(physical) +
                            " != flushed + padding + moved " + std::to_string(expect));
    if (val("logical_bytes_flushed") > val("logical_bytes_written"))
      issue("counters", "logical_bytes_flushed exceeds logical_bytes_written");
  }

  void check_conv_layout() {
    if (!j_.contains("sidecar") || !j_["sidecar"].contains("conv_store")) return;
    const json& cs = j_["sidecar"]["conv_store"];
    const json files = cs.value("files", json::object());
    std::vector<std::pair<uint64_t, std::pair<uint64_t, std::string>>> regions;
    for (auto it = files.begin(); it != files.end(); ++it) {
      uint64_t off = it.value().value("offset", uint64_t(0));
      uint64_t size = it.value().value("size", uint64_t(0));
      uint64_t cap = it.value().value("capacity", uint64_t(0));
      if (cap == 0)
        issue("conv-layout", "region '" + it.key() + "' has zero capacity");
      if (size > cap)
        issue("conv-layout", "region '" + it.key() + "' holds " + std::to_string(size) +
                                 " bytes in capacity " + std::to_string(cap));
      regions.push_back({off, {cap, it.key()}});
      conv_extent_ = std::max(conv_extent_, off + cap);
      rep_.conv_files++;
    }
    std::sort(regions.begin(), regions.end());
    for (size_t i = 1; i < regions.size(); ++i) {
      auto& [poff, prest] = regions[i - 1];
      if (poff + prest.first > regions[i].first)
        issue("conv-layout", "regions '" + prest.second + "' and '" +
                                 regions[i].second.second + "' overlap");
    }
  }

  void check_snapshot(const json& snap) {
    if (snap.value("zone_count", uint32_t(0)) != zone_count_ ||
        snap.value("zone_capacity", uint64_t(0)) != zone_capacity_ ||
        snap.value("block_size", uint32_t(0)) != uint32_t(block_))
      issue("snapshot-geometry", "device snapshot geometry does not match metadata");

    std::map<uint32_t, std::pair<std::string, uint64_t>> dev_zones;  // id -> {state, wp}
    for (const json& zj : snap.value("zones", json::array()))
      dev_zones[zj.value("id", uint32_t(0))] = {zj.value("state", std::string("?")),
                                                zj.value("wp", uint64_t(0))};

    for (const auto& [zone, entries] : zone_entries_) {
      if (entries.empty()) continue;
      auto it = dev_zones.find(zone);
      if (it == dev_zones.end()) {
        issue("write-pointer", "zone " + std::to_string(zone) + " absent from snapshot");
        continue;
      }
      uint64_t top = 0;
      for (const DirEntry& d : entries) top = std::max(top, d.offset + d.length);
      if (top > it->second.second)
        issue("write-pointer", "zone " + std::to_string(zone) + ": entries reach " +
                                   std::to_string(top) + " but write pointer is " +
                                   std::to_string(it->second.second));
      if (it->second.first == "empty")
        issue("zone-state", "zone " + std::to_string(zone) +
                                " holds recorded extents but the device reports it empty");
    }

    uint64_t conv_bytes = snap.value("conventional_bytes", uint64_t(0));
    if (conv_extent_ > conv_bytes)
      issue("conv-layout", "conventional regions reach " + std::to_string(conv_extent_) +
                               " but the device exposes " + std::to_string(conv_bytes) +
                               " bytes");
  }

  const json& j_;
  FsckReport rep_;
  uint32_t zone_count_ = 0;
  uint64_t zone_capacity_ = 0;
  uint64_t block_ = 1;
  uint64_t conv_extent_ = 0;
  std::map<uint64_t, uint32_t> file_stream_;
  std::map<uint64_t, uint64_t> file_size_;
  std::vector<FileExtent> file_extents_;
  std::map<uint32_t, std::vector<DirEntry>> zone_entries_;
  std::map<uint32_t, uint32_t> zone_stream_;
};

}  // namespace

json FsckReport::to_json() const {
  json arr = json::array();
  for (const FsckIssue& i : issues) arr.push_back({{"check", i.check}, {"detail", i.detail}});
  return json{{"clean", clean()},
              {"issue_count", issues.size()},
              {"issues", std::move(arr)},
              {"stats",
               {{"files", files},
                {"extents", extents},
                {"zones", zones_described},
                {"conv_files", conv_files}}}};
}

std::string FsckReport::to_text() const {
  std::ostringstream os;
  if (clean()) {
    os << "clean: " << files << " files, " << extents << " extents, " << zones_described
       << " zones, " << conv_files << " conventional regions\n";
  } else {
    for (const FsckIssue& i : issues) os << "[" << i.check << "] " << i.detail << "\n";
    os << issues.size() << " issue(s) found\n";
  }
  return os.str();
}

FsckReport fsck_metadata(const json& committed) {
  return Checker(committed).run(nullptr);
}

FsckReport fsck_metadata(const json& committed, const json& device_snapshot) {
  return Checker(committed).run(&device_snapshot);
}

json device_snapshot_json(const ZonedDevice& dev) {
  const DeviceConfig& cfg = dev.config();
  json zones = json::array();
  for (const ZoneInfo& z : dev.zone_report())
    zones.push_back({{"id", z.id},
                     {"state", zone_state_name(z.state)},
                     {"wp", z.write_pointer}});
  return json{{"zone_count", cfg.zone_count},
              {"zone_capacity", cfg.zone_capacity},
              {"block_size", cfg.block_size},
              {"conventional_bytes", cfg.conventional_bytes},
              {"zones", std::move(zones)}};
}

}  // namespace valet::fsck
