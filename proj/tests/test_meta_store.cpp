#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "valet/meta_store.hpp"

using namespace valet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("valet_meta_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string str() const { return path.string(); }
};

json state_with(int x) { return json{{"payload", x}}; }

void corrupt_file(const std::string& p, const std::string& content) {
  std::ofstream os(p, std::ios::trunc);
  os << content;
}

}  // namespace

TEST_CASE("fresh store loads as empty, then round-trips commits") {
  TempDir td;
  MetaStore ms(td.str());
  CHECK(!ms.load().has_value());
  CHECK(ms.generation() == 0);

  ms.commit(state_with(1));
  CHECK(ms.generation() == 1);
  ms.commit(state_with(2));
  ms.commit(state_with(3));
  CHECK(ms.generation() == 3);

  MetaStore back(td.str());
  auto j = back.load();
  REQUIRE(j.has_value());
  CHECK((*j)["payload"] == 3);
  CHECK((*j)["generation"] == 3);
  CHECK(back.generation() == 3);
}

TEST_CASE("alternating slots: previous state survives every commit") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  for (int i = 1; i <= 6; ++i) {
    ms.commit(state_with(i));
    // Both slot files exist from the second commit on; the non-pointed one
    // holds the previous generation.
    if (i >= 2) {
      MetaStore probe(td.str());
      auto cur = probe.load();
      REQUIRE(cur.has_value());
      CHECK((*cur)["payload"] == i);
    }
  }
}

TEST_CASE("torn write to the inactive slot never loses the committed state") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  ms.commit(state_with(10));

  for (auto phase : {CommitPhase::kBeforeSlotWrite, CommitPhase::kMidSlotWrite,
                     CommitPhase::kAfterSlotWrite}) {
    MetaStore victim(td.str());
    victim.load();
    victim.set_crash_hook([phase](CommitPhase p) {
      if (p == phase) throw CrashInjected(p);
    });
    CHECK_THROWS_AS(victim.commit(state_with(999)), CrashInjected);

    MetaStore reader(td.str());
    auto j = reader.load();
    REQUIRE(j.has_value());
    CHECK((*j)["payload"] == 10);  // old state intact
    CHECK(reader.generation() == 1);
  }
}

TEST_CASE("crash after pointer swap lands on the new state") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  ms.commit(state_with(10));
  ms.set_crash_hook([](CommitPhase p) {
    if (p == CommitPhase::kAfterPointerSwap) throw CrashInjected(p);
  });
  CHECK_THROWS_AS(ms.commit(state_with(11)), CrashInjected);
  CHECK(ms.generation() == 2);  // in-memory reflects the completed swap

  MetaStore reader(td.str());
  auto j = reader.load();
  REQUIRE(j.has_value());
  CHECK((*j)["payload"] == 11);
  CHECK(reader.generation() == 2);
}

TEST_CASE("corrupt pointed slot falls back to the other slot") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  ms.commit(state_with(1));  // slot a
  ms.commit(state_with(2));  // slot b, pointer -> b
  corrupt_file(td.str() + "/meta.b", "{\"version\": 1, \"generation\"");

  MetaStore reader(td.str());
  auto j = reader.load();
  REQUIRE(j.has_value());
  CHECK((*j)["payload"] == 1);  // older but valid
  CHECK(reader.generation() == 1);
}

TEST_CASE("missing pointer picks the valid slot with highest generation") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  ms.commit(state_with(1));
  ms.commit(state_with(2));
  fs::remove(td.str() + "/meta.cur");

  MetaStore reader(td.str());
  auto j = reader.load();
  REQUIRE(j.has_value());
  CHECK((*j)["payload"] == 2);
}

TEST_CASE("both slots corrupt raises CorruptMetadata") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  ms.commit(state_with(1));
  ms.commit(state_with(2));
  corrupt_file(td.str() + "/meta.a", "not json");
  corrupt_file(td.str() + "/meta.b", "{\"version\": 99, \"generation\": 5}");

  MetaStore reader(td.str());
  try {
    reader.load();
    FAIL("expected CorruptMetadata");
  } catch (const ValetError& e) {
    CHECK(e.code() == Errc::corrupt_metadata);
  }
}

TEST_CASE("slot verification catches a silently failed write") {
  // Simulate by corrupting the target slot from the kAfterSlotWrite hook,
  // i.e. after the store thinks it wrote the body.
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  ms.commit(state_with(1));  // active = a, next target = b
  ms.set_crash_hook([&](CommitPhase p) {
    if (p == CommitPhase::kAfterSlotWrite) corrupt_file(td.str() + "/meta.b", "garbage");
  });
  try {
    ms.commit(state_with(2));
    FAIL("expected CorruptMetadata");
  } catch (const ValetError& e) {
    CHECK(e.code() == Errc::corrupt_metadata);
  }
  // Old state still loadable.
  MetaStore reader(td.str());
  auto j = reader.load();
  REQUIRE(j.has_value());
  CHECK((*j)["payload"] == 1);
}

TEST_CASE("generation increases by exactly one per commit") {
  TempDir td;
  MetaStore ms(td.str());
  ms.load();
  for (uint64_t i = 1; i <= 5; ++i) {
    ms.commit(state_with(int(i)));
    CHECK(ms.generation() == i);
    MetaStore probe(td.str());
    auto j = probe.load();
    CHECK((*j)["generation"] == i);
  }
}
