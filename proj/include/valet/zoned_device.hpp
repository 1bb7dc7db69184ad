#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "valet/errors.hpp"
#include "valet/util.hpp"

namespace valet {

// In-memory model of a zoned block device plus a small conventional
// (random-write) region, the kind of hybrid layout current ZNS drives expose.
// Zones are append-only: writes land at the write pointer, never in between.

enum class ZoneState : uint8_t { kEmpty = 0, kOpen = 1, kClosed = 2, kFull = 3 };

const char* zone_state_name(ZoneState s);

struct DeviceConfig {
  uint32_t zone_count = 64;
  uint64_t zone_capacity = 1ull << 20;  // bytes per zone
  uint32_t block_size = 4096;
  uint32_t max_open_zones = 14;         // matches common ZNS hardware limits
  uint64_t conventional_bytes = 4ull << 20;

  void validate() const;
  uint64_t zoned_capacity() const { return uint64_t(zone_count) * zone_capacity; }
};

struct ZoneInfo {
  uint32_t id = 0;
  ZoneState state = ZoneState::kEmpty;
  uint64_t write_pointer = 0;  // bytes from zone start
};

struct DeviceCounters {
  uint64_t bytes_appended = 0;       // total payload bytes accepted by zone_append
  uint64_t bytes_read = 0;           // zone reads
  uint64_t zone_resets = 0;          // resets of non-empty zones
  uint64_t zone_finishes = 0;        // explicit finishes + implicit fill-to-full
  uint64_t conventional_bytes_written = 0;
  uint64_t conventional_bytes_read = 0;
};

class ZonedDevice {
 public:
  explicit ZonedDevice(const DeviceConfig& cfg);

  ZonedDevice(const ZonedDevice&) = delete;
  ZonedDevice& operator=(const ZonedDevice&) = delete;

  const DeviceConfig& config() const { return cfg_; }

  // Appends `payload` (positive, block-aligned length) at the zone's write
  // pointer and returns the byte offset the data landed at.  Opening a fresh
  // zone consumes an open slot; filling a zone to capacity releases it.
  uint64_t zone_append(uint32_t zone, std::span<const uint8_t> payload);

  // Reads [offset, offset+len) from a zone; the range must lie below the
  // write pointer.
  Bytes zone_read(uint32_t zone, uint64_t offset, uint64_t len) const;

  // Rewinds the write pointer and discards contents.  Resetting an Empty
  // zone is a no-op (no counter bump).
  void zone_reset(uint32_t zone);

  // Transitions an Open zone to Full, sealing it below capacity.
  void zone_finish(uint32_t zone);

  ZoneInfo zone_info(uint32_t zone) const;
  std::vector<ZoneInfo> zone_report() const;  // atomic snapshot
  uint64_t write_pointer(uint32_t zone) const;
  ZoneState zone_state(uint32_t zone) const;
  uint32_t open_zone_count() const;

  // Conventional region: random byte-addressed reads/writes, no alignment
  // requirement.
  void conv_write(uint64_t offset, std::span<const uint8_t> payload);
  Bytes conv_read(uint64_t offset, uint64_t len) const;

  DeviceCounters counters() const;

  // Deep copy of the full device state (used by the crash harness to freeze
  // the "hardware" at an injection point).
  std::unique_ptr<ZonedDevice> clone() const;

  // Versioned binary snapshot, restorable with load_snapshot.
  void save_snapshot(const std::string& path) const;
  static std::unique_ptr<ZonedDevice> load_snapshot(const std::string& path);

 private:
  struct Zone {
    ZoneState state = ZoneState::kEmpty;
    Bytes data;  // size() == write pointer
  };

  void check_zone(uint32_t zone) const;
  uint32_t open_count_locked() const;

  DeviceConfig cfg_;
  std::vector<Zone> zones_;
  Bytes conventional_;
  mutable DeviceCounters counters_;  // mutable: reads bump read counters
  mutable std::mutex mu_;
};

}  // namespace valet
