#include "valet/zoned_device.hpp"

#include <cstring>
#include <fstream>

namespace valet {

const char* zone_state_name(ZoneState s) {
  switch (s) {
    case ZoneState::kEmpty: return "empty";
    case ZoneState::kOpen: return "open";
    case ZoneState::kClosed: return "closed";
    case ZoneState::kFull: return "full";
  }
  return "?";
}

void DeviceConfig::validate() const {
  if (zone_count == 0 || zone_capacity == 0 || block_size == 0)
    throw_errc(Errc::invalid_config, "zone_count/zone_capacity/block_size must be positive");
  if (zone_capacity % block_size != 0)
    throw_errc(Errc::invalid_config, "zone_capacity must be a multiple of block_size");
  if (max_open_zones == 0)
    throw_errc(Errc::invalid_config, "max_open_zones must be positive");
}

ZonedDevice::ZonedDevice(const DeviceConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  zones_.resize(cfg_.zone_count);
  conventional_.resize(cfg_.conventional_bytes, 0);
}

void ZonedDevice::check_zone(uint32_t zone) const {
  if (zone >= cfg_.zone_count)
    throw_errc(Errc::unknown_zone, "zone " + std::to_string(zone));
}

uint32_t ZonedDevice::open_count_locked() const {
  uint32_t n = 0;
  for (const auto& z : zones_)
    if (z.state == ZoneState::kOpen) ++n;
  return n;
}

uint64_t ZonedDevice::zone_append(uint32_t zone, std::span<const uint8_t> payload) {
  check_zone(zone);
  if (payload.empty() || payload.size() % cfg_.block_size != 0)
    throw_errc(Errc::unaligned_payload,
               "append of " + std::to_string(payload.size()) + " bytes (block " +
                   std::to_string(cfg_.block_size) + ")");
  std::lock_guard<std::mutex> lk(mu_);
  Zone& z = zones_[zone];
  if (z.state == ZoneState::kFull)
    throw_errc(Errc::zone_full, "zone " + std::to_string(zone) + " is full");
  if (z.data.size() + payload.size() > cfg_.zone_capacity)
    throw_errc(Errc::zone_full, "zone " + std::to_string(zone) + " overflow: wp=" +
                                    std::to_string(z.data.size()) + " append=" +
                                    std::to_string(payload.size()));
  if (z.state == ZoneState::kEmpty || z.state == ZoneState::kClosed) {
    // Implicit open consumes a slot even when the append will fill the zone.
    if (open_count_locked() >= cfg_.max_open_zones)
      throw_errc(Errc::open_zone_limit,
                 "max_open_zones=" + std::to_string(cfg_.max_open_zones) + " reached");
    z.state = ZoneState::kOpen;
  }
  uint64_t off = z.data.size();
  z.data.insert(z.data.end(), payload.begin(), payload.end());
  counters_.bytes_appended += payload.size();
  if (z.data.size() == cfg_.zone_capacity) {
    z.state = ZoneState::kFull;
    counters_.zone_finishes++;
  }
  return off;
}

Bytes ZonedDevice::zone_read(uint32_t zone, uint64_t offset, uint64_t len) const {
  check_zone(zone);
  std::lock_guard<std::mutex> lk(mu_);
  const Zone& z = zones_[zone];
  if (offset + len > z.data.size())
    throw_errc(Errc::read_beyond_wp, "zone " + std::to_string(zone) + " [" +
                                         std::to_string(offset) + "," +
                                         std::to_string(offset + len) + ") wp=" +
                                         std::to_string(z.data.size()));
  counters_.bytes_read += len;
  return Bytes(z.data.begin() + offset, z.data.begin() + offset + len);
}

void ZonedDevice::zone_reset(uint32_t zone) {
  check_zone(zone);
  std::lock_guard<std::mutex> lk(mu_);
  Zone& z = zones_[zone];
  if (z.state == ZoneState::kEmpty) return;  // explicit no-op
  z.data.clear();
  z.data.shrink_to_fit();
  z.state = ZoneState::kEmpty;
  counters_.zone_resets++;
}

void ZonedDevice::zone_finish(uint32_t zone) {
  check_zone(zone);
  std::lock_guard<std::mutex> lk(mu_);
  Zone& z = zones_[zone];
  if (z.state != ZoneState::kOpen && z.state != ZoneState::kClosed)
    throw_errc(Errc::not_open, "finish on " + std::string(zone_state_name(z.state)) +
                                   " zone " + std::to_string(zone));
  z.state = ZoneState::kFull;
  counters_.zone_finishes++;
}

ZoneInfo ZonedDevice::zone_info(uint32_t zone) const {
  check_zone(zone);
  std::lock_guard<std::mutex> lk(mu_);
  return ZoneInfo{zone, zones_[zone].state, zones_[zone].data.size()};
}

std::vector<ZoneInfo> ZonedDevice::zone_report() const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<ZoneInfo> out;
  out.reserve(zones_.size());
  for (uint32_t i = 0; i < zones_.size(); ++i)
    out.push_back(ZoneInfo{i, zones_[i].state, zones_[i].data.size()});
  return out;
}

uint64_t ZonedDevice::write_pointer(uint32_t zone) const {
  check_zone(zone);
  std::lock_guard<std::mutex> lk(mu_);
  return zones_[zone].data.size();
}

ZoneState ZonedDevice::zone_state(uint32_t zone) const {
  check_zone(zone);
  std::lock_guard<std::mutex> lk(mu_);
  return zones_[zone].state;
}

uint32_t ZonedDevice::open_zone_count() const {
  std::lock_guard<std::mutex> lk(mu_);
  return open_count_locked();
}

void ZonedDevice::conv_write(uint64_t offset, std::span<const uint8_t> payload) {
  std::lock_guard<std::mutex> lk(mu_);
  if (offset + payload.size() > conventional_.size())
    throw_errc(Errc::out_of_range, "conventional write [" + std::to_string(offset) + "," +
                                       std::to_string(offset + payload.size()) + ") region=" +
                                       std::to_string(conventional_.size()));
  std::memcpy(conventional_.data() + offset, payload.data(), payload.size());
  counters_.conventional_bytes_written += payload.size();
}

Bytes ZonedDevice::conv_read(uint64_t offset, uint64_t len) const {
  std::lock_guard<std::mutex> lk(mu_);
  if (offset + len > conventional_.size())
    throw_errc(Errc::out_of_range, "conventional read [" + std::to_string(offset) + "," +
                                       std::to_string(offset + len) + ") region=" +
                                       std::to_string(conventional_.size()));
  counters_.conventional_bytes_read += len;
  return Bytes(conventional_.begin() + offset, conventional_.begin() + offset + len);
}

DeviceCounters ZonedDevice::counters() const {
  std::lock_guard<std::mutex> lk(mu_);
  return counters_;
}

std::unique_ptr<ZonedDevice> ZonedDevice::clone() const {
  std::lock_guard<std::mutex> lk(mu_);
  auto copy = std::make_unique<ZonedDevice>(cfg_);
  copy->zones_ = zones_;
  copy->conventional_ = conventional_;
  copy->counters_ = counters_;
  return copy;
}

namespace {

constexpr char kSnapMagic[8] = {'V', 'A', 'L', 'E', 'T', 'D', 'V', '1'};

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void ZonedDevice::save_snapshot(const std::string& path) const {
  std::lock_guard<std::mutex> lk(mu_);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw_errc(Errc::out_of_range, "cannot open snapshot file " + path);
  os.write(kSnapMagic, sizeof(kSnapMagic));
  put<uint32_t>(os, cfg_.zone_count);
  put<uint64_t>(os, cfg_.zone_capacity);
  put<uint32_t>(os, cfg_.block_size);
  put<uint32_t>(os, cfg_.max_open_zones);
  put<uint64_t>(os, cfg_.conventional_bytes);
  put<DeviceCounters>(os, counters_);
  put<uint64_t>(os, conventional_.size());
  os.write(reinterpret_cast<const char*>(conventional_.data()),
           std::streamsize(conventional_.size()));
  for (const auto& z : zones_) {
    put<uint8_t>(os, uint8_t(z.state));
    put<uint64_t>(os, z.data.size());
    os.write(reinterpret_cast<const char*>(z.data.data()), std::streamsize(z.data.size()));
  }
  os.flush();
  if (!os) throw_errc(Errc::out_of_range, "short write to snapshot file " + path);
}

std::unique_ptr<ZonedDevice> ZonedDevice::load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_errc(Errc::not_found, "snapshot file " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kSnapMagic, sizeof(magic)) != 0)
    throw_errc(Errc::corrupt_metadata, "bad device snapshot magic in " + path);
  DeviceConfig cfg;
  cfg.zone_count = get<uint32_t>(is);
  cfg.zone_capacity = get<uint64_t>(is);
  cfg.block_size = get<uint32_t>(is);
  cfg.max_open_zones = get<uint32_t>(is);
  cfg.conventional_bytes = get<uint64_t>(is);
  auto dev = std::make_unique<ZonedDevice>(cfg);
  dev->counters_ = get<DeviceCounters>(is);
  uint64_t conv_len = get<uint64_t>(is);
  if (conv_len != dev->conventional_.size())
    throw_errc(Errc::corrupt_metadata, "snapshot conventional size mismatch");
  is.read(reinterpret_cast<char*>(dev->conventional_.data()), std::streamsize(conv_len));
  for (auto& z : dev->zones_) {
    z.state = ZoneState(get<uint8_t>(is));
    uint64_t wp = get<uint64_t>(is);
    if (wp > cfg.zone_capacity) throw_errc(Errc::corrupt_metadata, "snapshot wp > capacity");
    z.data.resize(wp);
    is.read(reinterpret_cast<char*>(z.data.data()), std::streamsize(wp));
  }
  if (!is) throw_errc(Errc::corrupt_metadata, "truncated device snapshot " + path);
  return dev;
}

}  // namespace valet
