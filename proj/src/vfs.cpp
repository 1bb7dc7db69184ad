#include "valet/vfs.hpp"

#include <fnmatch.h>

namespace valet {

namespace {
std::string basename_of(const std::string& path) {
  auto pos = path.find_last_of('/');
  return pos == std::string::npos ? path : path.substr(pos + 1);
}
}  // namespace

bool PassthroughPolicy::matches(const std::string& path, bool mmap_writable) const {
  if (mmap_writable) return true;  // in-place updates can never hit zones
  if (basename_of(path) == "LOCK") return true;
  for (const auto& g : globs)
    if (::fnmatch(g.c_str(), path.c_str(), 0) == 0) return true;
  return false;
}

VfsFacade::VfsFacade(Mapper& mapper, ConventionalStore& conv, PlacementEngine& engine,
                     VfsConfig cfg)
    : mapper_(mapper), conv_(conv), engine_(engine), cfg_(std::move(cfg)) {
  // The conventional layout rides inside the mapper's atomic commits, and
  // its quarantined regions unfreeze at the same commit boundary as zone
  // resets.  Must run before mapper.mount() so recovery sees the sidecar.
  mapper_.register_sidecar(
      "conv_store", [&c = conv_]() { return c.state_json(); },
      [&c = conv_](const json& j) { c.restore_state(j); });
  mapper_.register_commit_hook([&c = conv_]() { c.on_commit(); });
}

VfsFacade::FdEntry& VfsFacade::entry(int fd) {
  auto it = fds_.find(fd);
  if (it == fds_.end()) throw_errc(Errc::bad_fd, "fd " + std::to_string(fd));
  return it->second;
}

const VfsFacade::FdEntry& VfsFacade::entry(int fd) const {
  auto it = fds_.find(fd);
  if (it == fds_.end()) throw_errc(Errc::bad_fd, "fd " + std::to_string(fd));
  return it->second;
}

bool VfsFacade::route_passthrough(const std::string& path, bool mmap_writable) const {
  // Hint-only systems store everything on the conventional side; the hints
  // are advisory.  Host-managed systems divert only the policy matches.
  if (cfg_.mode == VfsMode::kHintOnly) return true;
  return cfg_.passthrough.matches(path, mmap_writable);
}

uint32_t VfsFacade::active_streams() const {
  const PlacementConfig& pc = engine_.config();
  if (pc.mode == PlacementConfig::Mode::kLearned) return pc.k;
  return pc.rules.max_stream() + 1;
}

void VfsFacade::record_audit(const FileMeta& meta, bool policy_match) {
  AuditRecord rec;
  rec.path = meta.path;
  if (policy_match) {
    // In-place-update files carry no stream; a hint-consuming kernel would
    // see them as undefined-lifetime.
    rec.stream = "-";
    rec.group = "-";
    rec.kernel_hint = kernel_hint_name(KernelHint::kUndefined);
  } else if (cfg_.mode == VfsMode::kHintOnly) {
    Hint h = engine_.hint_for_open(meta);
    rec.stream = std::to_string(h.stream);
    rec.group = std::to_string(h.group);
    rec.kernel_hint = kernel_hint_name(resolve_multistream(h, active_streams()));
  } else {
    // Host-managed: the mapper consumed the full-fidelity directive; no
    // kernel hint is issued.
    Uuid u = *mapper_.lookup(meta.path);
    StreamId s = mapper_.stream_of(u);
    rec.stream = std::to_string(s);
    rec.group = std::to_string(engine_.current_group(s));
    rec.kernel_hint = "-";
  }
  audit_.push_back(std::move(rec));
}

int VfsFacade::f_open(const std::string& path, uint32_t flags, uint64_t size_hint) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FileMeta meta{path, flags, size_hint};
  bool policy_match = cfg_.passthrough.matches(path, false);
  bool pass = policy_match || cfg_.mode == VfsMode::kHintOnly;

  FdEntry e;
  e.path = path;
  e.passthrough = pass;
  e.writable = meta.writable();
  bool created = false;
  if (pass) {
    if (!conv_.exists(path)) {
      if (!meta.create()) throw_errc(Errc::not_found, "no such file: " + path);
      conv_.create(path);
      created = true;
    } else if (meta.writable() && meta.trunc()) {
      conv_.truncate(path, 0);
    }
  } else {
    created = !mapper_.exists(path);
    e.uuid = mapper_.open_file(meta);  // throws NotFound without kOfCreate
  }
  if (created && meta.writable()) record_audit(meta, policy_match);

  int fd = next_fd_++;
  fds_[fd] = std::move(e);
  return fd;
}

int VfsFacade::f_mmap_open(const std::string& path, bool writable) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry e;
  e.path = path;
  e.mmap = true;
  e.writable = writable;
  if (writable) {
    // Writable mappings are updated in place and may never touch zones.
    if (cfg_.mode == VfsMode::kHostManaged && mapper_.exists(path))
      throw_errc(Errc::not_supported, "writable mmap of a zone-backed file: " + path);
    e.passthrough = true;
    if (!conv_.exists(path)) {
      conv_.create(path);
      record_audit(FileMeta{path, kOfWrite | kOfCreate, 0}, true);
    }
  } else if (mapper_.exists(path)) {
    e.passthrough = false;
    e.uuid = mapper_.open_file(FileMeta{path, kOfRead, 0});
  } else if (conv_.exists(path)) {
    e.passthrough = true;
  } else {
    throw_errc(Errc::not_found, "no such file: " + path);
  }
  int fd = next_fd_++;
  fds_[fd] = std::move(e);
  return fd;
}

void VfsFacade::f_close(int fd) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry e = entry(fd);  // copy: close invalidates the slot
  fds_.erase(fd);
  if (!e.passthrough) {
    mapper_.close_file(e.uuid, e.writable);
  } else if (e.writable) {
    mapper_.commit_metadata();  // close syncs the persisted namespace
  }
}

void VfsFacade::f_write(int fd, std::span<const uint8_t> data) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry& e = entry(fd);
  if (!e.passthrough) {
    mapper_.write(e.uuid, data);
    return;
  }
  if (!e.writable) throw_errc(Errc::read_only, "fd " + std::to_string(fd));
  conv_.write(e.path, conv_.size(e.path), data);
}

void VfsFacade::f_pwrite(int fd, std::span<const uint8_t> data, uint64_t offset) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry& e = entry(fd);
  if (!e.passthrough) {
    // Zone-backed files are append-only; holes and overwrites belong on
    // the conventional side.
    uint64_t cur = mapper_.size(e.uuid);
    if (offset != cur)
      throw_errc(Errc::non_append_write, "fd " + std::to_string(fd) + " offset " +
                                             std::to_string(offset) + " != size " +
                                             std::to_string(cur));
    mapper_.write(e.uuid, data);
    return;
  }
  if (!e.writable) throw_errc(Errc::read_only, "fd " + std::to_string(fd));
  conv_.write(e.path, offset, data);
}

Bytes VfsFacade::f_read(int fd, uint64_t offset, uint64_t len) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry& e = entry(fd);
  if (!e.passthrough) return mapper_.read(e.uuid, offset, len);
  return conv_.read(e.path, offset, len);
}

void VfsFacade::f_fsync(int fd) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry& e = entry(fd);
  if (!e.passthrough) {
    mapper_.fsync(e.uuid);
    return;
  }
  // Conventional writes hit the device synchronously; an fsync is a
  // metadata commit (size and layout become durable).
  mapper_.commit_metadata();
}

void VfsFacade::f_truncate(int fd, uint64_t new_size) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry& e = entry(fd);
  if (!e.writable) throw_errc(Errc::read_only, "fd " + std::to_string(fd));
  if (!e.passthrough) {
    mapper_.truncate(e.uuid, new_size);
    return;
  }
  conv_.truncate(e.path, new_size);
}

void VfsFacade::f_fallocate(int fd, uint64_t, uint64_t) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  (void)entry(fd);  // validates the descriptor
  // Suppressed: allocation happens on flush; preallocation would only
  // burn zone space.  Success with zero device effect.
}

void VfsFacade::f_readahead(int fd, uint64_t offset, uint64_t len) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  FdEntry& e = entry(fd);
  if (!e.passthrough) mapper_.readahead(e.uuid, offset, len);
  // Conventional reads are already "memory"; nothing to stage.
}

void VfsFacade::f_unlink(const std::string& path) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  if (mapper_.exists(path)) {
    mapper_.unlink(path);  // commits
    return;
  }
  if (conv_.exists(path)) {
    conv_.unlink(path);
    mapper_.commit_metadata();  // persists the sidecar, releases quarantine
    return;
  }
  throw_errc(Errc::not_found, "unlink: " + path);
}

void VfsFacade::f_rename(const std::string& from, const std::string& to) {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  if (mapper_.exists(from)) {
    if (conv_.exists(to)) conv_.unlink(to);  // cross-backend replace
    mapper_.rename(from, to);                // commits
    return;
  }
  if (conv_.exists(from)) {
    if (mapper_.exists(to)) mapper_.unlink(to);  // commits on its own
    conv_.rename(from, to);
    mapper_.commit_metadata();
    return;
  }
  throw_errc(Errc::not_found, "rename: " + from);
}

uint64_t VfsFacade::f_size(int fd) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  const FdEntry& e = entry(fd);
  if (!e.passthrough) return mapper_.size(e.uuid);
  return conv_.size(e.path);
}

bool VfsFacade::exists(const std::string& path) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return mapper_.exists(path) || conv_.exists(path);
}

void VfsFacade::f_dup(int) {
  throw_errc(Errc::not_supported, "dup: descriptors are session-scoped");
}

void VfsFacade::f_rmdir(const std::string& path) {
  throw_errc(Errc::not_supported, "rmdir: no directory tree, flat namespace: " + path);
}

VfsFacade::FdInfo VfsFacade::fd_info(int fd) const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  const FdEntry& e = entry(fd);
  return FdInfo{e.path, e.passthrough, e.writable, e.mmap};
}

size_t VfsFacade::open_fd_count() const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  return fds_.size();
}

std::vector<std::string> VfsFacade::audit_lines() const {
  std::lock_guard<std::recursive_mutex> lk(mu_);
  std::vector<std::string> out;
  out.reserve(audit_.size());
  for (const auto& r : audit_) out.push_back(r.line());
  return out;
}

}  // namespace valet
