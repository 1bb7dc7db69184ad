#include "valet/util.hpp"

#include <cstdio>
#include <cstring>

#include "valet/errors.hpp"

namespace valet {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::unknown_zone: return "UnknownZone";
    case Errc::zone_full: return "ZoneFull";
    case Errc::open_zone_limit: return "OpenZoneLimit";
    case Errc::unaligned_payload: return "UnalignedPayload";
    case Errc::read_beyond_wp: return "ReadBeyondWritePointer";
    case Errc::not_open: return "NotOpen";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::corrupt_metadata: return "CorruptMetadata";
    case Errc::device_mismatch: return "DeviceMismatch";
    case Errc::crash_injected: return "CrashInjected";
    case Errc::parse_error: return "ParseError";
    case Errc::missing_default: return "MissingDefault";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::model_uninitialized: return "ModelUninitialized";
    case Errc::unknown_uuid: return "UnknownUuid";
    case Errc::not_found: return "NotFound";
    case Errc::exists: return "Exists";
    case Errc::not_open_for_write: return "NotOpenForWrite";
    case Errc::buffer_pool_exhausted: return "BufferPoolExhausted";
    case Errc::no_free_zones: return "NoFreeZones";
    case Errc::gc_stall: return "GcStall";
    case Errc::truncate_beyond_eof: return "TruncateBeyondEof";
    case Errc::bad_fd: return "BadFd";
    case Errc::read_only: return "ReadOnly";
    case Errc::no_space: return "NoSpace";
    case Errc::non_append_write: return "NonAppendWrite";
    case Errc::not_supported: return "NotSupported";
    case Errc::bad_trace: return "BadTrace";
    case Errc::verification_failure: return "VerificationFailure";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

Bytes synth_payload(uint64_t seed, uint64_t size) {
  Bytes out(size);
  uint64_t i = 0;
  while (i < size) {
    uint64_t st = seed + i / 8;  // word index keyed so chunks are offset-stable
    uint64_t w = splitmix64(st);
    size_t n = std::min<uint64_t>(8, size - i);
    std::memcpy(out.data() + i, &w, n);
    i += n;
  }
  return out;
}

std::string human_bytes(uint64_t n) {
  const char* units[] = {"B", "KiB", "MiB", "GiB", "TiB"};
  double v = double(n);
  int u = 0;
  while (v >= 1024.0 && u < 4) {
    v /= 1024.0;
    ++u;
  }
  char buf[32];
  if (u == 0)
    std::snprintf(buf, sizeof(buf), "%llu B", static_cast<unsigned long long>(n));
  else
    std::snprintf(buf, sizeof(buf), "%.2f %s", v, units[u]);
  return buf;
}

}  // namespace valet
