#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "valet/errors.hpp"
#include "valet/util.hpp"
#include "valet/zoned_device.hpp"

namespace valet {

using json = nlohmann::json;

// Random-write file store over the device's conventional region.  Backs
// passthrough files (locks, manifests, writable mmaps): small, updated in
// place, no zone/stream semantics.  Layout metadata persists as a sidecar
// blob inside the mapper's metadata commits; regions freed by a realloc or
// an unlink are quarantined until the next commit so the pre-commit image
// never loses bytes it still references.
class ConventionalStore {
 public:
  struct Region {
    uint64_t offset = 0;
    uint64_t size = 0;      // logical file size
    uint64_t capacity = 0;  // bytes reserved at offset
  };

  ConventionalStore(ZonedDevice& dev, uint64_t align = 512);

  // File API (paths are independent of the mapper namespace).
  void create(const std::string& path);
  bool exists(const std::string& path) const;
  void write(const std::string& path, uint64_t offset, std::span<const uint8_t> data);
  Bytes read(const std::string& path, uint64_t offset, uint64_t len) const;
  void truncate(const std::string& path, uint64_t new_size);
  void unlink(const std::string& path);
  void rename(const std::string& from, const std::string& to);
  uint64_t size(const std::string& path) const;
  std::vector<std::string> list_paths() const;

  // Sidecar integration: serialize layout, restore it, release quarantine.
  json state_json() const;
  void restore_state(const json& j);
  void on_commit();  // quarantined regions become reusable

  uint64_t bytes_in_use() const;

 private:
  const Region& rregion(const std::string& path) const;
  Region& wregion(const std::string& path);
  uint64_t allocate(uint64_t need);
  void release(uint64_t offset, uint64_t capacity);  // into quarantine
  void rebuild_free_list();

  ZonedDevice& dev_;
  uint64_t align_;
  uint64_t total_;
  std::map<std::string, Region> files_;
  std::map<uint64_t, uint64_t> free_;        // offset -> capacity, coalesced
  std::vector<std::pair<uint64_t, uint64_t>> quarantine_;  // offset, capacity
  mutable std::mutex mu_;
};

}  // namespace valet
