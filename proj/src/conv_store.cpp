#include "valet/conv_store.hpp"

#include <algorithm>

namespace valet {

ConventionalStore::ConventionalStore(ZonedDevice& dev, uint64_t align)
    : dev_(dev), align_(align), total_(dev.config().conventional_bytes) {
  if (align_ == 0 || total_ % align_ != 0)
    throw_errc(Errc::invalid_config, "conventional region not a multiple of the allocation unit");
  free_[0] = total_;
}

const ConventionalStore::Region& ConventionalStore::rregion(const std::string& path) const {
  auto it = files_.find(path);
  if (it == files_.end()) throw_errc(Errc::not_found, "conventional file: " + path);
  return it->second;
}

ConventionalStore::Region& ConventionalStore::wregion(const std::string& path) {
  auto it = files_.find(path);
  if (it == files_.end()) throw_errc(Errc::not_found, "conventional file: " + path);
  return it->second;
}

uint64_t ConventionalStore::allocate(uint64_t need) {
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second >= need) {
      uint64_t off = it->first;
      uint64_t cap = it->second;
      free_.erase(it);
      if (cap > need) free_[off + need] = cap - need;
      return off;
    }
  }
  throw_errc(Errc::no_space, "conventional region full (" + std::to_string(need) + " bytes)");
}

void ConventionalStore::release(uint64_t offset, uint64_t capacity) {
  // Not merged into the free list yet: the committed metadata may still
  // point at these bytes, so reuse must wait for the covering commit.
  quarantine_.emplace_back(offset, capacity);
}

void ConventionalStore::on_commit() {
  std::lock_guard<std::mutex> lk(mu_);
  for (auto [off, cap] : quarantine_) {
    free_[off] = cap;
  }
  quarantine_.clear();
  // Coalesce adjacent runs so fragmentation cannot accrete forever.
  for (auto it = free_.begin(); it != free_.end();) {
    auto next = std::next(it);
    if (next != free_.end() && it->first + it->second == next->first) {
      it->second += next->second;
      free_.erase(next);
    } else {
      ++it;
    }
  }
}

void ConventionalStore::create(const std::string& path) {
  std::lock_guard<std::mutex> lk(mu_);
  if (files_.count(path)) throw_errc(Errc::exists, "conventional file: " + path);
  Region r;
  r.capacity = align_;
  r.offset = allocate(r.capacity);
  r.size = 0;
  files_[path] = r;
}

bool ConventionalStore::exists(const std::string& path) const {
  std::lock_guard<std::mutex> lk(mu_);
  return files_.count(path) > 0;
}

void ConventionalStore::write(const std::string& path, uint64_t offset,
                              std::span<const uint8_t> data) {
  std::lock_guard<std::mutex> lk(mu_);
  Region& r = wregion(path);
  uint64_t end = offset + data.size();
  if (end > r.capacity) {
    // Grow by doubling: allocate-copy-quarantine, the conventional analog
    // of realloc.  Old bytes stay put until the next commit.
    uint64_t new_cap = std::max<uint64_t>(r.capacity, align_);
    while (new_cap < end) new_cap *= 2;
    uint64_t new_off = allocate(new_cap);
    if (r.size > 0) {
      Bytes old = dev_.conv_read(r.offset, r.size);
      dev_.conv_write(new_off, old);
    }
    release(r.offset, r.capacity);
    r.offset = new_off;
    r.capacity = new_cap;
  }
  if (offset > r.size) {
    // Fill the hole with zeros so reads over it are deterministic.
    Bytes zeros(offset - r.size, 0);
    dev_.conv_write(r.offset + r.size, zeros);
  }
  dev_.conv_write(r.offset + offset, data);
  r.size = std::max(r.size, end);
}

Bytes ConventionalStore::read(const std::string& path, uint64_t offset, uint64_t len) const {
  std::lock_guard<std::mutex> lk(mu_);
  const Region& r = rregion(path);
  if (offset + len > r.size)
    throw_errc(Errc::out_of_range, "read past EOF: " + path + " [" + std::to_string(offset) +
                                       "," + std::to_string(offset + len) + ") size " +
                                       std::to_string(r.size));
  if (len == 0) return {};
  return dev_.conv_read(r.offset + offset, len);
}

void ConventionalStore::truncate(const std::string& path, uint64_t new_size) {
  std::lock_guard<std::mutex> lk(mu_);
  Region& r = wregion(path);
  if (new_size > r.size)
    throw_errc(Errc::truncate_beyond_eof,
               path + " to " + std::to_string(new_size) + " > " + std::to_string(r.size));
  r.size = new_size;  // capacity is retained; conventional files stay small
}

void ConventionalStore::unlink(const std::string& path) {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = files_.find(path);
  if (it == files_.end()) throw_errc(Errc::not_found, "conventional file: " + path);
  release(it->second.offset, it->second.capacity);
  files_.erase(it);
}

void ConventionalStore::rename(const std::string& from, const std::string& to) {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = files_.find(from);
  if (it == files_.end()) throw_errc(Errc::not_found, "conventional file: " + from);
  if (from == to) return;
  if (auto dst = files_.find(to); dst != files_.end()) {
    release(dst->second.offset, dst->second.capacity);
    files_.erase(dst);
  }
  Region r = it->second;
  files_.erase(it);
  files_[to] = r;
}

uint64_t ConventionalStore::size(const std::string& path) const {
  std::lock_guard<std::mutex> lk(mu_);
  return rregion(path).size;
}

std::vector<std::string> ConventionalStore::list_paths() const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<std::string> out;
  out.reserve(files_.size());
  for (const auto& [p, r] : files_) out.push_back(p);
  return out;
}

uint64_t ConventionalStore::bytes_in_use() const {
  std::lock_guard<std::mutex> lk(mu_);
  uint64_t used = 0;
  for (const auto& [p, r] : files_) used += r.capacity;
  return used;
}

json ConventionalStore::state_json() const {
  std::lock_guard<std::mutex> lk(mu_);
  json files = json::object();
  for (const auto& [p, r] : files_) {
    files[p] = {{"offset", r.offset}, {"size", r.size}, {"capacity", r.capacity}};
  }
  return json{{"files", files}};
}

void ConventionalStore::restore_state(const json& j) {
  std::lock_guard<std::mutex> lk(mu_);
  files_.clear();
  quarantine_.clear();
  for (auto it = j.at("files").begin(); it != j.at("files").end(); ++it) {
    Region r;
    r.offset = it.value().at("offset").get<uint64_t>();
    r.size = it.value().at("size").get<uint64_t>();
    r.capacity = it.value().at("capacity").get<uint64_t>();
    files_[it.key()] = r;
  }
  rebuild_free_list();
}

void ConventionalStore::rebuild_free_list() {
  free_.clear();
  std::vector<std::pair<uint64_t, uint64_t>> used;
  used.reserve(files_.size());
  for (const auto& [p, r] : files_) used.emplace_back(r.offset, r.capacity);
  std::sort(used.begin(), used.end());
  uint64_t cursor = 0;
  for (auto [off, cap] : used) {
    if (off > cursor) free_[cursor] = off - cursor;
    cursor = off + cap;
  }
  if (cursor < total_) free_[cursor] = total_ - cursor;
}

}  // namespace valet
