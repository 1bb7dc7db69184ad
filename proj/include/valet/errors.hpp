#pragma once

#include <stdexcept>
#include <string>

namespace valet {

// Error taxonomy shared by every layer.  Call sites that care about the
// category catch ValetError and switch on code(); everything else just
// propagates the what() string.
enum class Errc {
  invalid_config,
  // zoned device
  unknown_zone,
  zone_full,
  open_zone_limit,
  unaligned_payload,
  read_beyond_wp,
  not_open,
  out_of_range,
  // metadata store
  corrupt_metadata,
  device_mismatch,
  crash_injected,
  // placement
  parse_error,
  missing_default,
  empty_batch,
  model_uninitialized,
  // mapper
  unknown_uuid,
  not_found,
  exists,
  not_open_for_write,
  buffer_pool_exhausted,
  no_free_zones,
  gc_stall,
  truncate_beyond_eof,
  // facade
  bad_fd,
  read_only,
  no_space,
  non_append_write,
  not_supported,
  // workload / verification
  bad_trace,
  verification_failure,
  io_error,
};

const char* errc_name(Errc c);

class ValetError : public std::runtime_error {
 public:
  ValetError(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void throw_errc(Errc code, const std::string& msg) {
  throw ValetError(code, msg);
}

}  // namespace valet
