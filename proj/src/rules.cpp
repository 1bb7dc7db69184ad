#include "valet/rules.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "valet/errors.hpp"

namespace valet {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

uint32_t flag_bit(const std::string& name, int lineno) {
  if (name == "APPEND") return kOfAppend;
  if (name == "TRUNC") return kOfTrunc;
  if (name == "CREATE") return kOfCreate;
  throw_errc(Errc::parse_error,
             "line " + std::to_string(lineno) + ": unknown flag '" + name + "'");
}

StreamId parse_stream(const std::string& tok, int lineno) {
  try {
    size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
    return StreamId(v);
  } catch (const std::exception&) {
    throw_errc(Errc::parse_error,
               "line " + std::to_string(lineno) + ": bad stream id '" + tok + "'");
  }
}

}  // namespace

StreamId RuleSet::match(const FileMeta& meta) const {
  for (const auto& r : rules_) {
    if (r.kind == Rule::Kind::kGlob) {
      // No FNM_PATHNAME: '*' crosses '/' so "wal/*" style patterns behave
      // the way rule authors expect for virtual paths.
      if (::fnmatch(r.pattern.c_str(), meta.path.c_str(), 0) == 0) return r.stream;
    } else {
      if (meta.flags & r.flag) return r.stream;
    }
  }
  return default_stream_;
}

StreamId RuleSet::max_stream() const {
  StreamId m = default_stream_;
  for (const auto& r : rules_) m = std::max(m, r.stream);
  return m;
}

RuleSet RuleSet::parse(const std::string& text) {
  RuleSet rs;
  bool have_default = false;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;

    auto arrow = line.find("->");
    if (arrow == std::string::npos)
      throw_errc(Errc::parse_error, "line " + std::to_string(lineno) + ": missing '->'");
    std::string lhs = trim(line.substr(0, arrow));
    std::string rhs = trim(line.substr(arrow + 2));
    StreamId stream = parse_stream(rhs, lineno);

    std::istringstream ls(lhs);
    std::string kw;
    ls >> kw;
    if (kw == "default") {
      std::string extra;
      if (ls >> extra)
        throw_errc(Errc::parse_error,
                   "line " + std::to_string(lineno) + ": trailing tokens after 'default'");
      rs.default_stream_ = stream;
      have_default = true;
    } else if (kw == "glob") {
      std::string pat;
      ls >> pat;
      if (pat.empty())
        throw_errc(Errc::parse_error, "line " + std::to_string(lineno) + ": glob needs a pattern");
      rs.rules_.push_back(Rule{Rule::Kind::kGlob, pat, 0, stream});
    } else if (kw == "flag") {
      std::string name;
      ls >> name;
      rs.rules_.push_back(Rule{Rule::Kind::kFlag, "", flag_bit(name, lineno), stream});
    } else {
      throw_errc(Errc::parse_error,
                 "line " + std::to_string(lineno) + ": unknown directive '" + kw + "'");
    }
  }
  if (!have_default) throw_errc(Errc::missing_default, "rule set has no 'default ->' line");
  return rs;
}

RuleSet RuleSet::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_errc(Errc::not_found, "rule file " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse(buf.str());
}

}  // namespace valet
