#include "doctest.h"

#include <algorithm>

#include "din/secure_agg.hpp"

using namespace din;
using namespace din::secagg;

TEST_CASE("shamir shares reconstruct the secret from any t-subset") {
  Rng rng(0x517a);
  for (int trial = 0; trial < 100; ++trial) {
    std::uint64_t secret = rng.uniform_u64(kFieldPrime);
    std::uint32_t t = 2 + static_cast<std::uint32_t>(rng.uniform_u64(4));
    std::uint32_t n = t + static_cast<std::uint32_t>(rng.uniform_u64(5));
    auto shares = shamir_share(secret, t, n, rng);
    REQUIRE(shares.size() == n);

    CHECK(shamir_reconstruct(shares, t) == secret);

    // any other t-subset agrees
    auto subset = shares;
    rng.shuffle(subset);
    subset.resize(t);
    CHECK(shamir_reconstruct(subset, t) == secret);
  }
}

TEST_CASE("two-share reconstruction matches hand lagrange") {
  // t=2: shares are (1, s+a) and (2, s+2a) for some line slope a, so
  // 2*y1 - y2 recovers s no matter what a the dealer drew.
  Rng rng(0x11);
  std::uint64_t secret = 424242;
  auto shares = shamir_share(secret, 2, 2, rng);
  std::uint64_t oracle =
      field::sub(field::mul(2, shares[0].value), shares[1].value);
  CHECK(oracle == secret);
  CHECK(shamir_reconstruct(shares, 2) == secret);
}

TEST_CASE("shamir rejects bad parameters") {
  Rng rng(0x22);
  CHECK_THROWS_AS(shamir_share(1, 0, 3, rng), Error);
  CHECK_THROWS_AS(shamir_share(1, 4, 3, rng), Error);

  auto shares = shamir_share(99, 3, 5, rng);
  shares.resize(2);
  CHECK_THROWS_AS(shamir_reconstruct(shares, 3), Error);

  auto dup = shamir_share(99, 2, 3, rng);
  dup[1].index = dup[0].index;
  CHECK_THROWS_AS(shamir_reconstruct(dup, 2), Error);
}

TEST_CASE("mask streams are deterministic per pair seed and round") {
  auto a = mask_stream(12345, 3, 16);
  auto b = mask_stream(12345, 3, 16);
  CHECK(a == b);
  CHECK(mask_stream(12345, 4, 16) != a);
  CHECK(mask_stream(12346, 3, 16) != a);
  for (std::uint64_t v : a) CHECK(v < kFieldPrime);
}

TEST_CASE("subgroup keys cover every pair and share at the threshold") {
  Rng rng(0x77);
  SubgroupKeys keys = setup_subgroup_keys({5, 2, 9, 4}, 3, rng);
  CHECK(keys.members == std::vector<AgentId>{2, 4, 5, 9});
  CHECK(keys.pair_seeds.size() == 6);
  CHECK(keys.seed_for(2, 9) == keys.seed_for(9, 2));
  CHECK(keys.position_of(4) == 1);
  for (const auto& [pair, shares] : keys.seed_shares) {
    REQUIRE(shares.size() == 4);
    CHECK(shamir_reconstruct(shares, 3) == keys.pair_seeds.at(pair));
  }
  CHECK_THROWS_AS(keys.seed_for(2, 3), Error);
}

namespace {

struct MaskedGroup {
  std::vector<AgentId> members;
  SubgroupKeys keys;
  std::vector<std::vector<double>> plain;
  std::vector<MaskedUpdate> masked;
};

MaskedGroup build_group(Rng& rng, const FixedPointCodec& codec, std::size_t size,
                        std::size_t dim, std::uint32_t threshold, std::uint32_t round) {
  MaskedGroup g;
  for (std::size_t i = 0; i < size; ++i)
    g.members.push_back(static_cast<AgentId>(1 + rng.uniform_u64(1000)));
  std::sort(g.members.begin(), g.members.end());
  g.members.erase(std::unique(g.members.begin(), g.members.end()), g.members.end());
  while (g.members.size() < size)
    g.members.push_back(static_cast<AgentId>(1001 + g.members.size()));
  std::sort(g.members.begin(), g.members.end());

  g.keys = setup_subgroup_keys(g.members, threshold, rng);
  for (AgentId m : g.members) {
    std::vector<double> w(dim);
    for (auto& x : w) x = rng.uniform_double(-64.0, 64.0);
    g.plain.push_back(w);
    g.masked.push_back(mask_update(codec, w, m, g.keys, round));
  }
  return g;
}

}  // namespace

TEST_CASE("masked sums equal plaintext sums exactly on the codec grid") {
  FixedPointCodec codec;
  Rng rng(0x600d);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t size = 3 + rng.uniform_u64(8);
    std::size_t dim = 1 + rng.uniform_u64(24);
    std::uint32_t round = 1 + static_cast<std::uint32_t>(rng.uniform_u64(5));
    auto g = build_group(rng, codec, size, dim, static_cast<std::uint32_t>(size / 2 + 1),
                         round);

    SubgroupSum out = unmask_aggregate(codec, g.masked, g.members, {}, {},
                                       static_cast<std::uint32_t>(size / 2 + 1), round);
    REQUIRE(out.count == g.members.size());
    REQUIRE(out.sum.size() == dim);
    for (std::size_t d = 0; d < dim; ++d) {
      double expect = 0.0;
      for (const auto& w : g.plain) expect += codec.decode(codec.encode(w[d]));
      CHECK(out.sum[d] == expect);
    }
  }
}

TEST_CASE("a single masked update is indistinguishable from noise scale") {
  // not a statistical test: just confirm the masked words differ from
  // the bare encoding, i.e. masks actually landed
  FixedPointCodec codec;
  Rng rng(0x3a3a);
  auto g = build_group(rng, codec, 4, 8, 3, 1);
  for (std::size_t i = 0; i < g.members.size(); ++i) {
    std::size_t hits = 0;
    for (std::size_t d = 0; d < 8; ++d)
      if (g.masked[i].values[d] == codec.encode(g.plain[i][d])) ++hits;
    CHECK(hits < 8);
  }
}

TEST_CASE("dropout recovery strips the dropouts' mask contributions") {
  FixedPointCodec codec;
  Rng rng(0xd0d0);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t size = 4 + rng.uniform_u64(6);
    std::size_t dim = 1 + rng.uniform_u64(12);
    std::uint32_t threshold = static_cast<std::uint32_t>(size / 2 + 1);
    auto g = build_group(rng, codec, size, dim, threshold, 2);

    std::size_t n_drop = 1 + rng.uniform_u64(size - threshold);
    std::vector<AgentId> dropouts(g.members.begin(), g.members.begin() + n_drop);
    std::vector<AgentId> survivors(g.members.begin() + n_drop, g.members.end());

    std::vector<MaskedUpdate> surviving_updates(g.masked.begin() + n_drop, g.masked.end());
    auto shares = collect_recovery_shares(g.keys, survivors, dropouts);
    SubgroupSum out = unmask_aggregate(codec, surviving_updates, survivors, dropouts,
                                       shares, threshold, 2);
    REQUIRE(out.count == survivors.size());
    for (std::size_t d = 0; d < dim; ++d) {
      double expect = 0.0;
      for (std::size_t i = n_drop; i < g.members.size(); ++i)
        expect += codec.decode(codec.encode(g.plain[i][d]));
      CHECK(out.sum[d] == expect);
    }
  }
}

TEST_CASE("survivors below the threshold cannot unmask") {
  FixedPointCodec codec;
  Rng rng(0xbad);
  auto g = build_group(rng, codec, 5, 4, 3, 1);
  std::vector<AgentId> survivors(g.members.begin(), g.members.begin() + 2);
  std::vector<AgentId> dropouts(g.members.begin() + 2, g.members.end());
  std::vector<MaskedUpdate> updates(g.masked.begin(), g.masked.begin() + 2);
  auto shares = collect_recovery_shares(g.keys, survivors, dropouts);
  CHECK_THROWS_AS(
      unmask_aggregate(codec, updates, survivors, dropouts, shares, 3, 1), Error);
}

TEST_CASE("masked updates survive serialization") {
  FixedPointCodec codec;
  Rng rng(0x5e5e);
  auto g = build_group(rng, codec, 3, 6, 2, 7);
  auto bytes = g.masked[0].serialize();
  MaskedUpdate back = MaskedUpdate::deserialize(bytes);
  CHECK(back.round == g.masked[0].round);
  CHECK(back.values == g.masked[0].values);

  bytes.pop_back();
  CHECK_THROWS_AS(MaskedUpdate::deserialize(bytes), Error);
}

TEST_CASE("round numbers domain-separate the masks") {
  FixedPointCodec codec;
  Rng rng(0x1111);
  auto g = build_group(rng, codec, 3, 4, 2, 1);
  MaskedUpdate r1 = mask_update(codec, g.plain[0], g.members[0], g.keys, 1);
  MaskedUpdate r2 = mask_update(codec, g.plain[0], g.members[0], g.keys, 2);
  CHECK(r1.values != r2.values);
  // unmasking with the wrong round's masks cannot reproduce the sum
  std::vector<MaskedUpdate> mixed = g.masked;
  mixed[0] = r2;
  SubgroupSum out = unmask_aggregate(codec, mixed, g.members, {}, {}, 2, 1);
  double expect = 0.0;
  for (const auto& w : g.plain) expect += codec.decode(codec.encode(w[0]));
  CHECK(out.sum[0] != expect);
}
