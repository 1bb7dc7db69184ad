#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valet/hints.hpp"

namespace valet {

// Heuristic classifier: an ordered rule list mapping file metadata to a
// stream.  Text format, one rule per line:
//
//     # comment
//     glob <pattern> -> <stream>
//     flag <APPEND|TRUNC|CREATE> -> <stream>
//     default -> <stream>
//
// First matching rule wins; the default line is mandatory and applies when
// nothing else matched, regardless of its position.
class RuleSet {
 public:
  struct Rule {
    enum class Kind { kGlob, kFlag } kind;
    std::string pattern;  // glob pattern
    uint32_t flag = 0;    // OpenFlags bit for kFlag
    StreamId stream = 0;
  };

  StreamId match(const FileMeta& meta) const;

  // Highest stream id any rule (or the default) can emit.
  StreamId max_stream() const;
  size_t rule_count() const { return rules_.size(); }
  StreamId default_stream() const { return default_stream_; }

  static RuleSet parse(const std::string& text);
  static RuleSet parse_file(const std::string& path);

 private:
  std::vector<Rule> rules_;
  StreamId default_stream_ = 0;
};

}  // namespace valet
