#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "din/auditing.hpp"
#include "din/common.hpp"
#include "din/content_store.hpp"
#include "din/economics.hpp"
#include "din/rng.hpp"

namespace din {
namespace chain {

using Amount = econ::Amount;

// Task lifecycle. Training and Aggregating repeat per round; the owner's
// final-round signal buys exactly one extra round before Evaluating.
enum class Phase : std::uint8_t {
  Deployed,
  Training,
  Aggregating,
  FinalSignaled,
  Evaluating,
  Settled,
};

const char* phase_name(Phase phase);

struct TaskConfig {
  TaskId task_id = 0;
  std::uint32_t rounds_max = 0;       // training rounds including the final extra one
  std::uint32_t k_min_subgroup = 0;
  Ratio evaluator_ratio{1, 10};       // evaluators per subgroup member
  Amount reward_pool = 0;
  Ratio fee_split_participants{97, 100};
  ScoreMicro acceptable_bound = 0;
  std::uint32_t shamir_threshold = 0;
  fl::ModelKind model_kind = fl::ModelKind::linear_regression;
  audit::MetricKind metric = audit::MetricKind::inverse_mse;

  void validate() const;  // throws InvalidConfig
};

// One revealed evaluation report and how the chain judged it.
struct RevealRecord {
  AgentId evaluator = 0;
  AgentId participant = 0;
  ScoreMicro score = 0;
  std::string salt_hex;
  audit::Attestation attestation;
  bool has_attestation = false;
  bool verdict = false;   // oracle input recorded by verify_attestations
  bool accepted = false;  // final judgement
};

enum class RevealResult { Accepted, Mismatch, MissingAttestation };

struct SubgroupState {
  std::vector<AgentId> members;   // sorted
  std::vector<AgentId> admitted;  // set by the availability check
  bool availability_checked = false;
  // evaluation bookkeeping (populated for the final round's subgroups)
  std::vector<AgentId> evaluators;
  bool commits_closed = false;
  bool attestations_verified = false;
  bool voided = false;
  std::map<std::string, std::string> commits;  // "evaluator:participant" -> digest hex
  std::vector<RevealRecord> reveals;
};

struct RoundState {
  std::vector<SubgroupState> subgroups;
  std::map<AgentId, std::string> updates;        // registered masked-update cids (hex)
  std::map<std::uint32_t, std::string> aggregates;  // subgroup -> aggregate cid (hex)
  std::map<std::uint32_t, std::uint32_t> aggregate_counts;
  std::set<std::uint32_t> aborted_subgroups;
  std::string global_model;  // cid hex, empty until recorded
};

struct Event {
  std::string phase;
  std::uint32_t round = 0;
  std::string kind;
  std::string detail;
};

struct ParticipantScore {
  ScoreMicro overall = 0;      // post bound filter
  ScoreMicro raw_overall = 0;  // pre bound filter
  bool eliminated = false;     // zeroed by the bound or unscoreable
  std::uint32_t accepted_reports = 0;
};

struct TaskState {
  TaskConfig config;
  AgentId owner = 0;
  Phase phase = Phase::Deployed;
  std::uint32_t current_round = 0;  // 1-based once training starts
  std::uint32_t final_round = 0;    // 0 until the owner signals
  std::string genesis_model;        // cid hex
  Amount escrow = 0;
  std::vector<AgentId> roster;      // sorted participants

  std::map<std::uint32_t, RoundState> rounds;
  std::map<AgentId, std::string> eval_registry;  // evaluation-model cids (hex)
  std::string control_digest;                    // hex, set by begin_evaluation
  std::string sealed_final_model;                // cid hex, revealed at settlement
  bool final_revealed = false;

  std::map<AgentId, ParticipantScore> participant_scores;  // at settlement
  std::map<AgentId, ScoreMicro> evaluator_scores;
  std::map<AgentId, Amount> payouts;
  Amount public_goods_remainder = 0;
  std::set<AgentId> slash_flagged;  // rejected attestation or reveal mismatch
  std::set<AgentId> abstained;      // assigned but silent

  std::vector<Event> events;

  const RoundState& round(std::uint32_t r) const;
  RoundState& round(std::uint32_t r);
};

struct Transaction {
  std::uint64_t height = 0;
  AgentId sender = 0;
  std::string op;
  nlohmann::json payload;
  std::string state_digest;  // hex digest of the state after applying

  std::string to_line() const;
  static Transaction from_line(const std::string& line);
};

// Commitment binding a score to a salt before reveals open.
Digest256 commitment_digest(ScoreMicro score, const std::string& salt_hex);

// Deterministic partition of the roster into groups of at least
// k_min; floor(n/k) groups, the remainder folded one-per-group.
std::vector<std::vector<AgentId>> form_subgroups(std::vector<AgentId> roster,
                                                 std::uint32_t k_min, Rng& rng);

// Deterministic assignment of staked evaluators: each subgroup draws
// ceil(ratio * size) evaluators, every evaluator serves at most one
// subgroup. Throws InsufficientEvaluators when the pool is too small.
std::vector<std::vector<AgentId>> assign_evaluators(
    const std::vector<AgentId>& staked, const std::vector<std::size_t>& subgroup_sizes,
    const Ratio& ratio, Rng& rng);

// The chain: an append-only transaction log over deterministic state.
// Every mutating call validates against current state, applies, then
// appends the transaction with a digest of the resulting state, so the
// log replays byte-identically.
class Ledger {
 public:
  Ledger() = default;

  // -- economics ops --
  void fund(AgentId agent, Amount amount);
  econ::StakeId stake(AgentId agent, Amount value, const Ratio& tax_rate);
  void reassess_stake(AgentId sender, econ::StakeId id, Amount value);
  Amount charge_tax(std::uint32_t epoch, const Ratio& tax_rate);
  void force_sale(AgentId buyer, econ::StakeId id);
  Amount slash(AgentId evaluator, const Ratio& fraction);

  // -- task ops --
  void deploy_task(AgentId owner, const TaskConfig& config, const std::string& genesis_cid,
                   Amount deposit, std::vector<AgentId> roster);
  void begin_round(AgentId sender, std::uint32_t round,
                   const std::vector<std::vector<AgentId>>& partition);
  void register_update(AgentId participant, std::uint32_t round, const std::string& cid);
  // one transaction per subgroup: per registered member, the list of
  // registered members whose update blob it could load
  void check_availability(AgentId sender, std::uint32_t round, std::uint32_t subgroup,
                          const std::map<AgentId, std::vector<AgentId>>& loads);
  void record_subgroup_aggregate(AgentId sender, std::uint32_t round, std::uint32_t subgroup,
                                 const std::string& cid, std::uint32_t count);
  void abort_subgroup(AgentId sender, std::uint32_t round, std::uint32_t subgroup,
                      const std::string& reason);
  void record_global_model(AgentId sender, std::uint32_t round, const std::string& cid);
  void signal_final_round(AgentId sender);
  void register_eval_model(AgentId participant, const std::string& cid);
  void begin_evaluation(AgentId sender, const std::string& control_digest_hex,
                        const std::vector<std::vector<AgentId>>& assignment);
  void commit_score(AgentId evaluator, AgentId participant, const Digest256& commitment);
  void close_commits(AgentId sender, std::uint32_t subgroup);
  RevealResult reveal_score(AgentId evaluator, AgentId participant, ScoreMicro score,
                            const std::string& salt_hex, const audit::Attestation& att,
                            bool has_attestation);
  void verify_attestations(AgentId sender, std::uint32_t subgroup,
                           const std::map<std::string, bool>& verdicts);
  void settle(AgentId sender);

  // -- queries --
  bool has_task() const { return task_.has_value(); }
  const TaskState& task() const;
  const econ::EconomicsState& economics() const { return econ_; }
  std::uint64_t height() const { return height_; }
  const std::vector<Transaction>& log() const { return log_; }

  // The final model stays sealed until settlement.
  const std::string& final_model_cid(AgentId requester) const;

  // sum(balances) + public goods + escrow == everything ever funded
  bool conserved() const;

  std::string state_digest_hex() const;
  nlohmann::json state_json() const;

  void export_log(const std::string& path) const;

  // Rebuild a ledger from exported transactions, verifying every per-step
  // digest. Throws ReplayMismatch on divergence.
  static Ledger replay(const std::vector<Transaction>& log);
  static Ledger replay_file(const std::string& path);

 private:
  void apply(const std::string& op, AgentId sender, const nlohmann::json& payload);
  void append(const std::string& op, AgentId sender, nlohmann::json payload);
  TaskState& mutable_task();
  void require_phase(Phase expected, const std::string& doing) const;
  void push_event(const std::string& kind, const std::string& detail);
  SubgroupState& subgroup_for_eval(std::uint32_t index);

  // apply handlers; validation and mutation both live here so live calls
  // and replay share one code path
  void apply_fund(AgentId sender, const nlohmann::json& p);
  void apply_stake(AgentId sender, const nlohmann::json& p);
  void apply_reassess(AgentId sender, const nlohmann::json& p);
  void apply_charge_tax(AgentId sender, const nlohmann::json& p);
  void apply_force_sale(AgentId sender, const nlohmann::json& p);
  void apply_slash(AgentId sender, const nlohmann::json& p);
  void apply_deploy(AgentId sender, const nlohmann::json& p);
  void apply_begin_round(AgentId sender, const nlohmann::json& p);
  void apply_register_update(AgentId sender, const nlohmann::json& p);
  void apply_check_availability(AgentId sender, const nlohmann::json& p);
  void apply_record_aggregate(AgentId sender, const nlohmann::json& p);
  void apply_abort_subgroup(AgentId sender, const nlohmann::json& p);
  void apply_record_global(AgentId sender, const nlohmann::json& p);
  void apply_signal_final(AgentId sender, const nlohmann::json& p);
  void apply_register_eval(AgentId sender, const nlohmann::json& p);
  void apply_begin_evaluation(AgentId sender, const nlohmann::json& p);
  void apply_commit(AgentId sender, const nlohmann::json& p);
  void apply_close_commits(AgentId sender, const nlohmann::json& p);
  RevealResult apply_reveal(AgentId sender, const nlohmann::json& p);
  void apply_verify_attestations(AgentId sender, const nlohmann::json& p);
  void apply_settle(AgentId sender, const nlohmann::json& p);

  econ::EconomicsState econ_;
  std::optional<TaskState> task_;
  std::uint64_t height_ = 0;
  std::vector<Transaction> log_;
};

}  // namespace chain
}  // namespace din
