#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "din/adversary.hpp"
#include "din/common.hpp"
#include "din/economics.hpp"
#include "din/fl_core.hpp"
#include "din/ledger.hpp"

namespace din {
namespace scen {

enum class ThreatTag : std::uint8_t { within_threat_model = 0, out_of_model };

const char* threat_tag_name(ThreatTag tag);
ThreatTag threat_tag_from(const std::string& name);

struct EconomicsParams {
  econ::Amount initial_balance = 0;
  econ::Amount stake_value = 0;
  Ratio tax_rate{0, 1};
  std::uint32_t evaluators = 0;  // staked evaluator agents
  Ratio slash_fraction{1, 2};
};

struct TrainingParams {
  std::uint32_t epochs = 1;
  double learning_rate = 0.05;
  bool verify_subgroup_mean = true;
};

// A complete, deterministic experiment description. Agent ids are laid
// out as: owner 0, participants 1..N, evaluators N+1..N+E.
struct Scenario {
  std::string name;
  ThreatTag tag = ThreatTag::within_threat_model;
  std::uint64_t seed = 0;

  fl::PopulationSpec population;
  chain::TaskConfig task;          // rounds_max = signal_round + 1
  std::uint32_t signal_round = 0;  // the owner signals during this round

  TrainingParams training;
  EconomicsParams economics;
  adv::AdversaryConfig adversary;

  std::vector<std::pair<AgentId, AgentId>> blocked_links;
  bool attestation_enforcement = true;
  std::set<AgentId> control_leak;  // participants secretly holding the control set

  AgentId owner() const { return kOwnerAgent; }
  std::vector<AgentId> participant_ids() const;
  std::vector<AgentId> evaluator_ids() const;
  std::uint32_t agent_count() const;

  // Sizes that form_subgroups will produce for the full roster, and the
  // evaluator head-count the task then requires.
  std::vector<std::size_t> expected_subgroup_sizes() const;
  std::size_t evaluators_needed() const;

  void validate() const;  // throws ScenarioInvalid

  static Scenario from_json(const nlohmann::json& j);
  static Scenario from_file(const std::string& path);
  nlohmann::json to_json() const;
};

}  // namespace scen
}  // namespace din
