#include "valet/hints.hpp"

#include <algorithm>
#include <cctype>

namespace valet {

const char* kernel_hint_name(KernelHint h) {
  switch (h) {
    case KernelHint::kHot: return "hot";
    case KernelHint::kWarm: return "warm";
    case KernelHint::kCold: return "cold";
    case KernelHint::kUndefined: return "undefined";
  }
  return "?";
}

KernelHint resolve_multistream(const Hint& h, uint32_t active_streams) {
  (void)active_streams;  // the mapping is stream-stable however many are live
  return KernelHint(h.stream % 4);
}

uint32_t dir_depth(const std::string& path) {
  uint32_t depth = 0;
  bool in_component = false;
  bool counted_any = false;
  for (char c : path) {
    if (c == '/') {
      if (in_component) {
        ++depth;
        counted_any = true;
      }
      in_component = false;
    } else {
      in_component = true;
    }
  }
  // A trailing component is the basename, not a directory.  A path ending in
  // '/' counted its last component as a directory already.
  (void)counted_any;
  return depth;
}

std::string path_extension(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = base.find_last_of('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == base.size()) return "";
  std::string ext = base.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext;
}

}  // namespace valet
