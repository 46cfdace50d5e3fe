#include "doctest.h"

#include "din/content_store.hpp"

using namespace din;

namespace {
std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }
}  // namespace

TEST_CASE("content ids depend on bytes, not the publisher") {
  ContentStore store(4);
  ContentId a = store.put(bytes("payload"), 1);
  ContentId b = store.put(bytes("payload"), 2);
  CHECK(a == b);
  CHECK(a == sha256(bytes("payload")));
  CHECK(store.blob_count() == 1);
  CHECK(store.put(bytes("other"), 1) != a);
}

TEST_CASE("fetch round-trips and registers the requester as a holder") {
  ContentStore store(3);
  ContentId id = store.put(bytes("blob"), 0);
  CHECK(store.get(id, 2) == bytes("blob"));

  // 2 is now a holder: cutting 0 off does not strand the blob
  store.reachability().block(0, 1);
  store.reachability().block(0, 2);
  CHECK(store.can_get(id, 1));
}

TEST_CASE("unknown content throws NotFound") {
  ContentStore store(2);
  ContentId ghost = sha256(bytes("never stored"));
  CHECK_FALSE(store.can_get(ghost, 0));
  CHECK_THROWS_AS(store.get(ghost, 0), Error);
  CHECK_THROWS_AS(store.fetch_any(ghost), Error);
}

TEST_CASE("blocked links sever direct fetches") {
  ContentStore store(2);
  ContentId id = store.put(bytes("x"), 0);
  store.reachability().block(0, 1);
  CHECK_FALSE(store.can_get(id, 1));
  CHECK_THROWS_AS(store.get(id, 1), Error);
  store.reachability().unblock(0, 1);
  CHECK(store.can_get(id, 1));
}

TEST_CASE("honest online agents relay around a severed link") {
  // 0 -- 2 -- 1 with the direct 0-1 link cut
  ContentStore store(3);
  ContentId id = store.put(bytes("x"), 0);
  store.reachability().block(0, 1);
  CHECK(store.can_get(id, 1));

  SUBCASE("a dishonest relay does not reshare") {
    store.set_dishonest({2});
    CHECK_FALSE(store.can_get(id, 1));
  }
  SUBCASE("an offline relay does not reshare") {
    store.set_offline({2});
    CHECK_FALSE(store.can_get(id, 1));
  }
  SUBCASE("a dishonest requester can still fetch for itself") {
    store.set_dishonest({1});
    CHECK(store.can_get(id, 1));
  }
}

TEST_CASE("relay chains span multiple honest hops") {
  ContentStore store(5);
  ContentId id = store.put(bytes("deep"), 0);
  // line topology 0-1-2-3-4: block everything except adjacent pairs
  for (AgentId a = 0; a < 5; ++a)
    for (AgentId b = a + 1; b < 5; ++b)
      if (b != a + 1) store.reachability().block(a, b);
  CHECK(store.can_get(id, 4));
  store.set_offline({2});
  CHECK_FALSE(store.can_get(id, 4));
  CHECK(store.can_get(id, 1));
}

TEST_CASE("offline holders do not serve their blobs") {
  ContentStore store(2);
  ContentId id = store.put(bytes("x"), 0);
  store.set_offline({0});
  CHECK_FALSE(store.can_get(id, 1));
  // the holder itself is offline too
  CHECK_FALSE(store.can_get(id, 0));
  store.set_offline({});
  CHECK(store.can_get(id, 1));
}

TEST_CASE("availability_count tallies reachable blobs") {
  ContentStore store(3);
  std::vector<ContentId> ids;
  ids.push_back(store.put(bytes("a"), 0));
  ids.push_back(store.put(bytes("b"), 1));
  ids.push_back(store.put(bytes("c"), 2));
  CHECK(store.availability_count(0, ids) == 3);
  store.set_dishonest({0, 1, 2});
  store.reachability().block(0, 2);
  CHECK(store.availability_count(0, ids) == 2);
}
