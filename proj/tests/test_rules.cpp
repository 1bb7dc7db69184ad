#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "valet/errors.hpp"
#include "valet/rules.hpp"

using namespace valet;

namespace {
FileMeta meta(const std::string& path, uint32_t flags = kOfWrite) {
  FileMeta m;
  m.path = path;
  m.flags = flags;
  return m;
}
}  // namespace

TEST_CASE("glob rules, first match wins, default as fallback") {
  auto rs = RuleSet::parse(
      "# classifier for an LSM layout\n"
      "glob wal/* -> 0\n"
      "glob *.sst -> 1\n"
      "glob sst/* -> 2   # never reached for *.sst names\n"
      "default -> 3\n");
  CHECK(rs.match(meta("wal/000042.log")) == 0);
  CHECK(rs.match(meta("sst/000010.sst")) == 1);  // *.sst wins over sst/*
  CHECK(rs.match(meta("sst/IDENTITY")) == 2);
  CHECK(rs.match(meta("MANIFEST-000001")) == 3);
  CHECK(rs.max_stream() == 3);
  CHECK(rs.default_stream() == 3);
  CHECK(rs.rule_count() == 3);
}

TEST_CASE("glob star crosses directory separators") {
  auto rs = RuleSet::parse("glob *.log -> 5\ndefault -> 0\n");
  CHECK(rs.match(meta("a/b/c/d.log")) == 5);
  CHECK(rs.match(meta("d.log")) == 5);
  CHECK(rs.match(meta("d.logx")) == 0);
}

TEST_CASE("flag rules match open flags") {
  auto rs = RuleSet::parse(
      "flag APPEND -> 1\n"
      "flag TRUNC -> 2\n"
      "flag CREATE -> 3\n"
      "default -> 0\n");
  CHECK(rs.match(meta("x", kOfWrite | kOfAppend)) == 1);
  CHECK(rs.match(meta("x", kOfWrite | kOfTrunc)) == 2);
  CHECK(rs.match(meta("x", kOfWrite | kOfCreate)) == 3);
  // first match wins when several flags are set
  CHECK(rs.match(meta("x", kOfWrite | kOfCreate | kOfAppend)) == 1);
  CHECK(rs.match(meta("x", kOfWrite)) == 0);
}

TEST_CASE("mixed glob and flag rules keep file order") {
  auto rs = RuleSet::parse(
      "glob *.tmp -> 9\n"
      "flag APPEND -> 1\n"
      "glob logs/* -> 2\n"
      "default -> 0\n");
  CHECK(rs.match(meta("logs/x.tmp", kOfWrite | kOfAppend)) == 9);
  CHECK(rs.match(meta("logs/x.dat", kOfWrite | kOfAppend)) == 1);
  CHECK(rs.match(meta("logs/x.dat", kOfWrite)) == 2);
}

TEST_CASE("blank lines, comments, and whitespace are tolerated") {
  auto rs = RuleSet::parse(
      "\n"
      "   # leading comment\n"
      "  glob   *.log   ->   7  \n"
      "\t\n"
      "default->1\n");
  CHECK(rs.match(meta("a.log")) == 7);
  CHECK(rs.match(meta("a.bin")) == 1);
}

TEST_CASE("missing default is rejected") {
  try {
    RuleSet::parse("glob *.log -> 0\n");
    FAIL("expected MissingDefault");
  } catch (const ValetError& e) {
    CHECK(e.code() == Errc::missing_default);
  }
}

TEST_CASE("parse errors identify the offending line") {
  auto expect_parse_error = [](const std::string& text) {
    try {
      RuleSet::parse(text);
      FAIL("expected ParseError for: ", text);
    } catch (const ValetError& e) {
      CHECK(e.code() == Errc::parse_error);
    }
  };
  expect_parse_error("glob *.log 0\ndefault -> 1\n");      // missing arrow
  expect_parse_error("glub *.log -> 0\ndefault -> 1\n");   // bad directive
  expect_parse_error("flag SHINY -> 0\ndefault -> 1\n");   // bad flag
  expect_parse_error("glob *.log -> -2\ndefault -> 1\n");  // negative stream
  expect_parse_error("glob *.log -> x\ndefault -> 1\n");   // non-numeric
  expect_parse_error("default stuff -> 1\n");              // trailing tokens
}

TEST_CASE("two-stream LSM rule set separates logs from table files") {
  // The classic RocksDB-on-zones split: WAL vs everything else.
  auto rs = RuleSet::parse(
      "glob *.log -> 0\n"
      "glob *.sst -> 1\n"
      "default -> 1\n");
  CHECK(rs.match(meta("000003.log", kOfWrite | kOfAppend | kOfCreate)) == 0);
  CHECK(rs.match(meta("000007.sst", kOfWrite | kOfCreate)) == 1);
  CHECK(rs.match(meta("MANIFEST-000001", kOfWrite | kOfAppend)) == 1);
  CHECK(rs.max_stream() == 1);
}
