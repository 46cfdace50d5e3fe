#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "din/common.hpp"

namespace din {
namespace econ {

// Smallest indivisible token unit. All protocol money is integer.
using Amount = std::int64_t;
using StakeId = std::uint32_t;

// Evaluator bond under a Harberger regime: self-assessed value, taxed
// every epoch, always purchasable at the assessed price while active.
struct StakeNFT {
  StakeId id = 0;
  AgentId owner = 0;
  Amount assessed_value = 0;
  bool active = false;
};

// Balances, the public-goods pool and the stake registry. Operations
// either complete or throw without mutating. Money is only ever minted
// by fund(); everything else transfers, so
//   sum(balances) + public_goods_pool + external escrows == total_issued
// holds at every step.
struct EconomicsState {
  std::map<AgentId, Amount> balances;
  Amount public_goods_pool = 0;
  std::map<StakeId, StakeNFT> stakes;
  StakeId next_stake_id = 1;
  Amount total_issued = 0;

  Amount balance_of(AgentId agent) const;
  Amount total_balances() const;

  void fund(AgentId agent, Amount amount);

  // Mint an active stake at the self-assessed value. No money moves at
  // stake time; the owner must at least be able to pay the first epoch's
  // tax, and may hold only one active stake.
  StakeId stake(AgentId agent, Amount value, const Ratio& tax_rate);

  void reassess(AgentId sender, StakeId id, Amount new_value);

  // Charge floor(value * rate) on every active stake. A stake whose
  // owner cannot pay in full is deactivated; there is no partial
  // payment. Returns the total collected into the public-goods pool.
  Amount charge_tax(const Ratio& tax_rate);

  // Continuous purchase option: anyone may buy an active stake at its
  // assessed value; the price goes to the previous owner.
  void force_sale(AgentId buyer, StakeId id);

  // Confiscate floor(fraction * assessed_value) from the owner's balance
  // into public goods. fraction >= 1 also deactivates. An owner whose
  // balance cannot cover pays what is there and loses the stake.
  // Returns the amount confiscated.
  Amount slash(AgentId evaluator, const Ratio& fraction);

  bool has_active_stake(AgentId agent) const;
  StakeId active_stake_of(AgentId agent) const;  // NoActiveStake if none

  // agents from the candidate list holding an active stake
  std::vector<AgentId> eligible(const std::vector<AgentId>& candidates) const;
};

}  // namespace econ
}  // namespace din
