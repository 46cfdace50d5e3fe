#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "din/codec.hpp"
#include "din/common.hpp"
#include "din/rng.hpp"

namespace din {
namespace secagg {

// ---- Shamir secret sharing over the aggregation field ----

struct SecretShare {
  std::uint64_t index = 0;  // evaluation point, 1-based
  std::uint64_t value = 0;
};

// Split secret into n shares, any t of which reconstruct it.
std::vector<SecretShare> shamir_share(std::uint64_t secret, std::uint32_t t,
                                      std::uint32_t n, Rng& rng);

// Lagrange interpolation at zero over the first t shares.
std::uint64_t shamir_reconstruct(const std::vector<SecretShare>& shares, std::uint32_t t);

// ---- pairwise masking ----

// Deterministic mask stream for one unordered pair and round. The lower
// agent id adds the stream to its encoded update, the higher subtracts
// it, so the pair's contributions cancel in the subgroup sum.
std::vector<std::uint64_t> mask_stream(std::uint64_t pair_seed, std::uint32_t round,
                                       std::size_t dim);

struct MaskedUpdate {
  std::uint32_t round = 0;
  std::vector<std::uint64_t> values;

  std::vector<std::uint8_t> serialize() const;
  static MaskedUpdate deserialize(const std::vector<std::uint8_t>& bytes);
};

// Per-subgroup key material for one task. Every unordered member pair
// holds a common seed; each seed is Shamir-shared across the subgroup
// (member i holds share i+1) so survivors can unmask around dropouts.
// Simulator simplification: agents are honest-but-curious, the object
// stores all seeds in one place and code paths take what their role is
// entitled to.
struct SubgroupKeys {
  std::vector<AgentId> members;  // sorted ascending
  std::uint32_t threshold = 0;
  std::map<std::pair<AgentId, AgentId>, std::uint64_t> pair_seeds;
  std::map<std::pair<AgentId, AgentId>, std::vector<SecretShare>> seed_shares;

  std::uint64_t seed_for(AgentId a, AgentId b) const;
  std::size_t position_of(AgentId a) const;
};

SubgroupKeys setup_subgroup_keys(std::vector<AgentId> members, std::uint32_t threshold,
                                 Rng& rng);

// Encode, clamp and mask one participant's update for the given round.
MaskedUpdate mask_update(const FixedPointCodec& codec, const std::vector<double>& weights,
                         AgentId self, const SubgroupKeys& keys, std::uint32_t round);

// Shares actually recoverable after a dropout: for every (dropout,
// survivor) pair seed, the shares held by surviving members only.
using RecoveryShares = std::map<std::pair<AgentId, AgentId>, std::vector<SecretShare>>;

RecoveryShares collect_recovery_shares(const SubgroupKeys& keys,
                                       const std::vector<AgentId>& survivors,
                                       const std::vector<AgentId>& dropouts);

struct SubgroupSum {
  std::vector<double> sum;    // decoded elementwise sum over survivors
  std::uint32_t count = 0;    // number of contributing updates
};

// Sum survivor updates and strip the masks that reference dropouts.
// The pairwise masks between survivors cancel by construction; each
// (dropout, survivor) seed is reconstructed from the recovery shares.
SubgroupSum unmask_aggregate(const FixedPointCodec& codec,
                             const std::vector<MaskedUpdate>& updates,
                             const std::vector<AgentId>& survivors,
                             const std::vector<AgentId>& dropouts,
                             const RecoveryShares& shares, std::uint32_t threshold,
                             std::uint32_t round);

}  // namespace secagg
}  // namespace din
