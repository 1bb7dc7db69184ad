#pragma once

#include <cstdint>
#include <string>

namespace valet {

using StreamId = uint32_t;
using GroupId = uint64_t;

// Open flags carried by traces and the facade.  Read access is implied;
// kWrite marks write intent.
enum OpenFlags : uint32_t {
  kOfRead = 0,
  kOfWrite = 1u << 0,
  kOfCreate = 1u << 1,
  kOfTrunc = 1u << 2,
  kOfAppend = 1u << 3,
};

struct FileMeta {
  std::string path;
  uint32_t flags = kOfRead;
  uint64_t size_hint = 0;  // expected size in bytes, 0 = unknown

  bool writable() const { return flags & kOfWrite; }
  bool append() const { return flags & kOfAppend; }
  bool create() const { return flags & kOfCreate; }
  bool trunc() const { return flags & kOfTrunc; }
};

// Placement hint produced by the engine: a lifetime stream plus the
// stream's current lifetime group (advances as the stream ages).
struct Hint {
  StreamId stream = 0;
  GroupId group = 0;
};

// The four write-hint classes exposed by multi-stream kernels/drives.
enum class KernelHint : uint8_t { kHot = 0, kWarm = 1, kCold = 2, kUndefined = 3 };

const char* kernel_hint_name(KernelHint h);

// Collapses a hint onto the 4-class kernel interface.  Injective when the
// active stream count fits; round-robin (mod 4) otherwise, which keeps the
// classes balanced within +/-1 for any stream population.
KernelHint resolve_multistream(const Hint& h, uint32_t active_streams);

// Full-fidelity resolver for the host-managed zone backend: nothing to
// collapse, the mapper consumes stream and group as-is.
struct PlacementDirective {
  StreamId stream = 0;
  GroupId group = 0;
};

inline PlacementDirective resolve_zones(const Hint& h) { return {h.stream, h.group}; }

// Directory depth of a path: number of directory components above the
// basename ("a/b/c.txt" -> 2, "c.txt" -> 0).  Leading slashes ignored.
uint32_t dir_depth(const std::string& path);

// Lowercased extension without the dot ("seg.SST" -> "sst", none -> "").
std::string path_extension(const std::string& path);

}  // namespace valet
