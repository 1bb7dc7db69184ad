#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valet/zoned_device.hpp"
#include <json.hpp>

namespace valet::fsck {

// One consistency violation found in persisted metadata.  `check` is a short
// stable slug naming the invariant; `detail` says where and how it broke.
struct FsckIssue {
  std::string check;
  std::string detail;
};

struct FsckReport {
  std::vector<FsckIssue> issues;
  uint64_t files = 0;
  uint64_t extents = 0;
  uint64_t zones_described = 0;
  uint64_t conv_files = 0;

  bool clean() const { return issues.empty(); }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Verifies every mapper invariant that is expressible from the committed
// metadata alone: path-map/file bijection, extent shape and alignment,
// file-size accounting, bidirectional file-extent <-> zone-directory
// agreement, per-zone overlap freedom, bitmap shape, stream purity, group
// ordering of non-relocated extents, the byte accounting identity, and the
// conventional sidecar layout.  An empty/absent committed state is clean.
FsckReport fsck_metadata(const nlohmann::json& committed);

// Same checks plus cross-checks against a point-in-time device snapshot
// (as produced by device_snapshot_json): geometry agreement, every recorded
// extent below its zone's write pointer, occupied zones not Empty, and
// conventional regions inside the conventional area.
FsckReport fsck_metadata(const nlohmann::json& committed,
                         const nlohmann::json& device_snapshot);

// Serializes device geometry plus per-zone {state, write pointer} so fsck
// can run offline against a saved snapshot.
nlohmann::json device_snapshot_json(const ZonedDevice& dev);

}  // namespace valet::fsck
