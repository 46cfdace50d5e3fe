#include "din/economics.hpp"

namespace din {
namespace econ {

Amount EconomicsState::balance_of(AgentId agent) const {
  auto it = balances.find(agent);
  return it == balances.end() ? 0 : it->second;
}

Amount EconomicsState::total_balances() const {
  Amount total = 0;
  for (const auto& [agent, amount] : balances) total += amount;
  return total;
}

void EconomicsState::fund(AgentId agent, Amount amount) {
  if (amount < 0) fail(ErrorCode::OutOfRange, "negative funding");
  balances[agent] += amount;
  total_issued += amount;
}

StakeId EconomicsState::stake(AgentId agent, Amount value, const Ratio& tax_rate) {
  if (value < 0) fail(ErrorCode::OutOfRange, "negative stake value");
  if (!tax_rate.at_most_one()) fail(ErrorCode::InvalidConfig, "tax rate outside [0, 1]");
  if (has_active_stake(agent))
    fail(ErrorCode::DuplicateRegistration,
         "agent " + std::to_string(agent) + " already holds an active stake");
  Amount first_tax = tax_rate.mul_floor(value);
  if (balance_of(agent) < first_tax)
    fail(ErrorCode::InsufficientBalance, "cannot cover the first epoch's tax of " +
                                             std::to_string(first_tax));
  StakeId id = next_stake_id++;
  stakes[id] = StakeNFT{id, agent, value, true};
  return id;
}

void EconomicsState::reassess(AgentId sender, StakeId id, Amount new_value) {
  auto it = stakes.find(id);
  if (it == stakes.end()) fail(ErrorCode::UnknownStake, "stake " + std::to_string(id));
  if (it->second.owner != sender)
    fail(ErrorCode::NotOwner, "stake " + std::to_string(id) + " is not owned by sender");
  if (!it->second.active) fail(ErrorCode::InactiveStake, "stake " + std::to_string(id));
  if (new_value < 0) fail(ErrorCode::OutOfRange, "negative stake value");
  it->second.assessed_value = new_value;
}

Amount EconomicsState::charge_tax(const Ratio& tax_rate) {
  if (!tax_rate.at_most_one()) fail(ErrorCode::InvalidConfig, "tax rate outside [0, 1]");
  Amount collected = 0;
  for (auto& [id, nft] : stakes) {
    if (!nft.active) continue;
    Amount tax = tax_rate.mul_floor(nft.assessed_value);
    if (balance_of(nft.owner) < tax) {
      nft.active = false;  // cannot pay: out of the evaluator set, no partial payment
      continue;
    }
    balances[nft.owner] -= tax;
    public_goods_pool += tax;
    collected += tax;
  }
  return collected;
}

void EconomicsState::force_sale(AgentId buyer, StakeId id) {
  auto it = stakes.find(id);
  if (it == stakes.end()) fail(ErrorCode::UnknownStake, "stake " + std::to_string(id));
  StakeNFT& nft = it->second;
  if (!nft.active) fail(ErrorCode::InactiveStake, "stake " + std::to_string(id));
  if (buyer != nft.owner && has_active_stake(buyer))
    fail(ErrorCode::DuplicateRegistration, "buyer already holds an active stake");
  if (balance_of(buyer) < nft.assessed_value)
    fail(ErrorCode::InsufficientBalance, "price is " + std::to_string(nft.assessed_value));
  balances[buyer] -= nft.assessed_value;
  balances[nft.owner] += nft.assessed_value;
  nft.owner = buyer;
}

Amount EconomicsState::slash(AgentId evaluator, const Ratio& fraction) {
  if (!fraction.valid()) fail(ErrorCode::InvalidConfig, "slash fraction");
  StakeId id = active_stake_of(evaluator);
  StakeNFT& nft = stakes.at(id);
  Amount due = fraction.mul_floor(nft.assessed_value);
  Amount available = balance_of(evaluator);
  Amount taken = due < available ? due : available;
  balances[evaluator] -= taken;
  public_goods_pool += taken;
  bool full_slash = static_cast<__int128>(fraction.num) >= fraction.den;
  if (full_slash || taken < due) nft.active = false;
  return taken;
}

bool EconomicsState::has_active_stake(AgentId agent) const {
  for (const auto& [id, nft] : stakes)
    if (nft.active && nft.owner == agent) return true;
  return false;
}

StakeId EconomicsState::active_stake_of(AgentId agent) const {
  for (const auto& [id, nft] : stakes)
    if (nft.active && nft.owner == agent) return id;
  fail(ErrorCode::NoActiveStake, "agent " + std::to_string(agent) + " has no active stake");
}

std::vector<AgentId> EconomicsState::eligible(const std::vector<AgentId>& candidates) const {
  std::vector<AgentId> out;
  for (AgentId agent : candidates)
    if (has_active_stake(agent)) out.push_back(agent);
  return out;
}

}  // namespace econ
}  // namespace din
