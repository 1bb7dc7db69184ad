#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "valet/conv_store.hpp"
#include "valet/errors.hpp"
#include "valet/hints.hpp"
#include "valet/mapper.hpp"
#include "valet/placement.hpp"
#include "valet/util.hpp"

namespace valet {

// Which backend family serves regular files.
//  kHostManaged: zone-backed mapper for everything except passthrough files.
//  kHintOnly:    every file lives in the conventional region; the facade
//                records the kernel hint that a real hint-consuming stack
//                would have received (there is no kernel here, the audit
//                log is the observable).
enum class VfsMode { kHostManaged, kHintOnly };

// Selects files that must bypass the zone backend: in-place-update files
// such as lock files and manifests, plus anything opened via writable mmap.
struct PassthroughPolicy {
  std::vector<std::string> globs;  // fnmatch(3)-style patterns over the path

  // `mmap_writable` is set by f_mmap_open for writable mappings.
  bool matches(const std::string& path, bool mmap_writable) const;
};

struct VfsConfig {
  VfsMode mode = VfsMode::kHostManaged;
  PassthroughPolicy passthrough;
};

// One audit line per created writable file: what hint the placement stack
// produced for it.  Tab-separated: path, stream, group, kernel hint, with
// "-" for columns that do not apply to the chosen route.
struct AuditRecord {
  std::string path;
  std::string stream;
  std::string group;
  std::string kernel_hint;

  std::string line() const { return path + "\t" + stream + "\t" + group + "\t" + kernel_hint; }
};

// POSIX-flavored session layer over the mapper and the conventional store.
// Descriptors are facade-scoped integers starting at 3, never reused and
// never persisted.
//
// Construction order: build the facade BEFORE calling mapper.mount() -- the
// constructor registers the conventional store as a metadata sidecar, and
// recovery only restores sidecars registered at mount time.  The store and
// the mapper must outlive the facade's registrations (tie their lifetimes).
class VfsFacade {
 public:
  VfsFacade(Mapper& mapper, ConventionalStore& conv, PlacementEngine& engine, VfsConfig cfg);

  int f_open(const std::string& path, uint32_t flags, uint64_t size_hint = 0);
  int f_mmap_open(const std::string& path, bool writable);
  void f_close(int fd);

  void f_write(int fd, std::span<const uint8_t> data);                    // append
  void f_pwrite(int fd, std::span<const uint8_t> data, uint64_t offset);  // positioned
  Bytes f_read(int fd, uint64_t offset, uint64_t len);
  void f_fsync(int fd);
  void f_truncate(int fd, uint64_t new_size);
  void f_fallocate(int fd, uint64_t offset, uint64_t len);  // suppressed: no effect
  void f_readahead(int fd, uint64_t offset, uint64_t len);  // hint: pre-stages cache

  void f_unlink(const std::string& path);
  void f_rename(const std::string& from, const std::string& to);

  uint64_t f_size(int fd) const;
  bool exists(const std::string& path) const;

  // Unimplemented POSIX surface fails loudly rather than silently passing.
  void f_dup(int fd);
  void f_rmdir(const std::string& path);

  // Introspection for tests and reports.
  struct FdInfo {
    std::string path;
    bool passthrough = false;
    bool writable = false;
    bool mmap = false;
  };
  FdInfo fd_info(int fd) const;
  size_t open_fd_count() const;
  const std::vector<AuditRecord>& audit_log() const { return audit_; }
  std::vector<std::string> audit_lines() const;
  VfsMode mode() const { return cfg_.mode; }

 private:
  struct FdEntry {
    std::string path;
    Uuid uuid = 0;  // mapper route only
    bool passthrough = false;
    bool writable = false;
    bool mmap = false;
  };

  FdEntry& entry(int fd);
  const FdEntry& entry(int fd) const;
  bool route_passthrough(const std::string& path, bool mmap_writable) const;
  void record_audit(const FileMeta& meta, bool passthrough);
  uint32_t active_streams() const;

  Mapper& mapper_;
  ConventionalStore& conv_;
  PlacementEngine& engine_;
  VfsConfig cfg_;
  std::map<int, FdEntry> fds_;
  int next_fd_ = 3;  // 0..2 read as stdio by convention; never handed out
  std::vector<AuditRecord> audit_;
  mutable std::recursive_mutex mu_;
};

}  // namespace valet
