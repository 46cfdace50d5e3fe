#include "din/ledger.hpp"

#include <algorithm>
#include <fstream>

namespace din {
namespace chain {

using nlohmann::json;

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::Deployed: return "Deployed";
    case Phase::Training: return "Training";
    case Phase::Aggregating: return "Aggregating";
    case Phase::FinalSignaled: return "FinalSignaled";
    case Phase::Evaluating: return "Evaluating";
    case Phase::Settled: return "Settled";
  }
  return "?";
}

void TaskConfig::validate() const {
  if (k_min_subgroup < 3) fail(ErrorCode::InvalidConfig, "k_min_subgroup must be >= 3");
  if (rounds_max < 2)
    fail(ErrorCode::InvalidConfig, "need at least one training and one evaluation round");
  if (reward_pool < 0) fail(ErrorCode::InvalidConfig, "negative reward pool");
  if (!evaluator_ratio.valid() || evaluator_ratio.num < 1)
    fail(ErrorCode::InvalidConfig, "evaluator ratio must be positive");
  if (!fee_split_participants.at_most_one())
    fail(ErrorCode::InvalidConfig, "fee split must be within [0, 1]");
  if (acceptable_bound < 0 || acceptable_bound > kScoreOne)
    fail(ErrorCode::InvalidConfig, "acceptable bound outside [0, 1]");
  if (shamir_threshold < 1) fail(ErrorCode::InvalidConfig, "shamir threshold must be >= 1");
  if (2ull * shamir_threshold <= k_min_subgroup)
    fail(ErrorCode::InvalidConfig, "shamir threshold must exceed half a subgroup");
}

const RoundState& TaskState::round(std::uint32_t r) const {
  auto it = rounds.find(r);
  if (it == rounds.end()) fail(ErrorCode::OutOfRange, "round " + std::to_string(r));
  return it->second;
}

RoundState& TaskState::round(std::uint32_t r) {
  auto it = rounds.find(r);
  if (it == rounds.end()) fail(ErrorCode::OutOfRange, "round " + std::to_string(r));
  return it->second;
}

Digest256 commitment_digest(ScoreMicro score, const std::string& salt_hex) {
  return DigestBuilder{}
      .add_string("score-commit")
      .add_i64(score)
      .add_string(salt_hex)
      .finish();
}

std::vector<std::vector<AgentId>> form_subgroups(std::vector<AgentId> roster,
                                                 std::uint32_t k_min, Rng& rng) {
  if (k_min == 0) fail(ErrorCode::InvalidConfig, "k_min must be positive");
  if (roster.size() < k_min)
    fail(ErrorCode::TooFewParticipants, std::to_string(roster.size()) + " participants, need " +
                                            std::to_string(k_min));
  std::sort(roster.begin(), roster.end());
  rng.shuffle(roster);

  std::size_t n = roster.size();
  std::size_t groups = n / k_min;
  std::size_t base = n / groups;
  std::size_t extra = n % groups;

  std::vector<std::vector<AgentId>> out(groups);
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    std::size_t size = base + (g < extra ? 1 : 0);
    out[g].assign(roster.begin() + cursor, roster.begin() + cursor + size);
    std::sort(out[g].begin(), out[g].end());
    cursor += size;
  }
  return out;
}

std::vector<std::vector<AgentId>> assign_evaluators(
    const std::vector<AgentId>& staked, const std::vector<std::size_t>& subgroup_sizes,
    const Ratio& ratio, Rng& rng) {
  if (!ratio.valid() || ratio.num < 1) fail(ErrorCode::InvalidConfig, "evaluator ratio");
  std::size_t total = 0;
  std::vector<std::size_t> needed(subgroup_sizes.size());
  for (std::size_t i = 0; i < subgroup_sizes.size(); ++i) {
    needed[i] = static_cast<std::size_t>(
        ratio.mul_ceil(static_cast<std::int64_t>(subgroup_sizes[i])));
    total += needed[i];
  }
  if (staked.size() < total)
    fail(ErrorCode::InsufficientEvaluators, std::to_string(staked.size()) +
                                                " staked evaluators, need " +
                                                std::to_string(total));
  std::vector<AgentId> pool = staked;
  std::sort(pool.begin(), pool.end());
  rng.shuffle(pool);

  std::vector<std::vector<AgentId>> out(subgroup_sizes.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < needed.size(); ++i) {
    out[i].assign(pool.begin() + cursor, pool.begin() + cursor + needed[i]);
    std::sort(out[i].begin(), out[i].end());
    cursor += needed[i];
  }
  return out;
}

// ---- json views of state (integers and strings only, keys sorted) ----

static json ratio_json(const Ratio& r) { return json{{"den", r.den}, {"num", r.num}}; }

static json attestation_json(const audit::Attestation& a) {
  return json{{"claimed_score", a.claimed_score},
              {"control_digest", a.control_digest.hex()},
              {"env_nonce", a.env_nonce.hex()},
              {"evaluator", a.evaluator},
              {"metric", static_cast<int>(a.metric)},
              {"participant", a.participant}};
}

static audit::Attestation attestation_from_json(const json& j) {
  audit::Attestation a;
  a.claimed_score = j.at("claimed_score").get<ScoreMicro>();
  a.control_digest = Digest256::from_hex(j.at("control_digest").get<std::string>());
  a.env_nonce = Digest256::from_hex(j.at("env_nonce").get<std::string>());
  a.evaluator = j.at("evaluator").get<AgentId>();
  a.metric = static_cast<audit::MetricKind>(j.at("metric").get<int>());
  a.participant = j.at("participant").get<AgentId>();
  return a;
}

static json subgroup_json(const SubgroupState& sg) {
  json reveals = json::array();
  for (const auto& r : sg.reveals) {
    reveals.push_back(json{{"accepted", r.accepted},
                           {"attestation", attestation_json(r.attestation)},
                           {"evaluator", r.evaluator},
                           {"has_attestation", r.has_attestation},
                           {"participant", r.participant},
                           {"salt", r.salt_hex},
                           {"score", r.score},
                           {"verdict", r.verdict}});
  }
  return json{{"admitted", sg.admitted},
              {"attestations_verified", sg.attestations_verified},
              {"availability_checked", sg.availability_checked},
              {"commits", sg.commits},
              {"commits_closed", sg.commits_closed},
              {"evaluators", sg.evaluators},
              {"members", sg.members},
              {"reveals", reveals},
              {"voided", sg.voided}};
}

static json round_json(const RoundState& r) {
  json subgroups = json::array();
  for (const auto& sg : r.subgroups) subgroups.push_back(subgroup_json(sg));
  json updates = json::object();
  for (const auto& [agent, cid] : r.updates) updates[std::to_string(agent)] = cid;
  json aggregates = json::object();
  for (const auto& [idx, cid] : r.aggregates) aggregates[std::to_string(idx)] = cid;
  json counts = json::object();
  for (const auto& [idx, c] : r.aggregate_counts) counts[std::to_string(idx)] = c;
  return json{{"aborted", r.aborted_subgroups},
              {"aggregate_counts", counts},
              {"aggregates", aggregates},
              {"global_model", r.global_model},
              {"subgroups", subgroups},
              {"updates", updates}};
}

static json task_json(const TaskState& t) {
  json rounds = json::object();
  for (const auto& [r, state] : t.rounds) rounds[std::to_string(r)] = round_json(state);
  json eval_registry = json::object();
  for (const auto& [agent, cid] : t.eval_registry) eval_registry[std::to_string(agent)] = cid;
  json pscore = json::object();
  for (const auto& [agent, s] : t.participant_scores)
    pscore[std::to_string(agent)] = json{{"accepted_reports", s.accepted_reports},
                                         {"eliminated", s.eliminated},
                                         {"overall", s.overall},
                                         {"raw_overall", s.raw_overall}};
  json escore = json::object();
  for (const auto& [agent, s] : t.evaluator_scores) escore[std::to_string(agent)] = s;
  json payouts = json::object();
  for (const auto& [agent, amount] : t.payouts) payouts[std::to_string(agent)] = amount;
  json events = json::array();
  for (const auto& e : t.events)
    events.push_back(json{{"detail", e.detail}, {"kind", e.kind}, {"phase", e.phase},
                          {"round", e.round}});
  return json{{"config",
               json{{"acceptable_bound", t.config.acceptable_bound},
                    {"evaluator_ratio", ratio_json(t.config.evaluator_ratio)},
                    {"fee_split", ratio_json(t.config.fee_split_participants)},
                    {"k_min_subgroup", t.config.k_min_subgroup},
                    {"metric", static_cast<int>(t.config.metric)},
                    {"model_kind", static_cast<int>(t.config.model_kind)},
                    {"reward_pool", t.config.reward_pool},
                    {"rounds_max", t.config.rounds_max},
                    {"shamir_threshold", t.config.shamir_threshold},
                    {"task_id", t.config.task_id}}},
              {"abstained", t.abstained},
              {"control_digest", t.control_digest},
              {"current_round", t.current_round},
              {"escrow", t.escrow},
              {"eval_registry", eval_registry},
              {"evaluator_scores", escore},
              {"events", events},
              {"final_revealed", t.final_revealed},
              {"final_round", t.final_round},
              {"genesis_model", t.genesis_model},
              {"owner", t.owner},
              {"participant_scores", pscore},
              {"payouts", payouts},
              {"phase", phase_name(t.phase)},
              {"public_goods_remainder", t.public_goods_remainder},
              {"roster", t.roster},
              {"rounds", rounds},
              {"sealed_final_model", t.sealed_final_model},
              {"slash_flagged", t.slash_flagged}};
}

static json econ_json(const econ::EconomicsState& e) {
  json balances = json::object();
  for (const auto& [agent, amount] : e.balances) balances[std::to_string(agent)] = amount;
  json stakes = json::object();
  for (const auto& [id, nft] : e.stakes)
    stakes[std::to_string(id)] = json{{"active", nft.active},
                                      {"assessed_value", nft.assessed_value},
                                      {"id", nft.id},
                                      {"owner", nft.owner}};
  return json{{"balances", balances},
              {"next_stake_id", e.next_stake_id},
              {"public_goods_pool", e.public_goods_pool},
              {"stakes", stakes},
              {"total_issued", e.total_issued}};
}

json Ledger::state_json() const {
  json out{{"economics", econ_json(econ_)}, {"height", height_}};
  out["task"] = task_ ? task_json(*task_) : json(nullptr);
  return out;
}

std::string Ledger::state_digest_hex() const {
  return sha256(state_json().dump()).hex();
}

std::string Transaction::to_line() const {
  json j{{"height", height},
         {"op", op},
         {"payload", payload},
         {"sender", sender},
         {"state_digest", state_digest}};
  return j.dump();
}

Transaction Transaction::from_line(const std::string& line) {
  json j = json::parse(line);
  Transaction tx;
  tx.height = j.at("height").get<std::uint64_t>();
  tx.op = j.at("op").get<std::string>();
  tx.payload = j.at("payload");
  tx.sender = j.at("sender").get<AgentId>();
  tx.state_digest = j.at("state_digest").get<std::string>();
  return tx;
}

// ---- plumbing ----

TaskState& Ledger::mutable_task() {
  if (!task_) fail(ErrorCode::UnknownTask, "no task deployed");
  return *task_;
}

const TaskState& Ledger::task() const {
  if (!task_) fail(ErrorCode::UnknownTask, "no task deployed");
  return *task_;
}

void Ledger::require_phase(Phase expected, const std::string& doing) const {
  const TaskState& t = task();
  if (t.phase != expected)
    fail(ErrorCode::WrongPhase, doing + " requires phase " + phase_name(expected) +
                                    ", current is " + phase_name(t.phase));
}

void Ledger::push_event(const std::string& kind, const std::string& detail) {
  TaskState& t = *task_;
  t.events.push_back(Event{phase_name(t.phase), t.current_round, kind, detail});
}

void Ledger::append(const std::string& op, AgentId sender, json payload) {
  apply(op, sender, payload);
  Transaction tx;
  tx.height = ++height_;
  tx.sender = sender;
  tx.op = op;
  tx.payload = std::move(payload);
  tx.state_digest = state_digest_hex();
  log_.push_back(std::move(tx));
}

void Ledger::apply(const std::string& op, AgentId sender, const json& p) {
  if (op == "fund") return apply_fund(sender, p);
  if (op == "stake") return apply_stake(sender, p);
  if (op == "reassess_stake") return apply_reassess(sender, p);
  if (op == "charge_tax") return apply_charge_tax(sender, p);
  if (op == "force_sale") return apply_force_sale(sender, p);
  if (op == "slash") return apply_slash(sender, p);
  if (op == "deploy_task") return apply_deploy(sender, p);
  if (op == "begin_round") return apply_begin_round(sender, p);
  if (op == "register_update") return apply_register_update(sender, p);
  if (op == "check_availability") return apply_check_availability(sender, p);
  if (op == "record_subgroup_aggregate") return apply_record_aggregate(sender, p);
  if (op == "abort_subgroup") return apply_abort_subgroup(sender, p);
  if (op == "record_global_model") return apply_record_global(sender, p);
  if (op == "signal_final_round") return apply_signal_final(sender, p);
  if (op == "register_eval_model") return apply_register_eval(sender, p);
  if (op == "begin_evaluation") return apply_begin_evaluation(sender, p);
  if (op == "commit_score") return apply_commit(sender, p);
  if (op == "close_commits") return apply_close_commits(sender, p);
  if (op == "reveal_score") { apply_reveal(sender, p); return; }
  if (op == "verify_attestations") return apply_verify_attestations(sender, p);
  if (op == "settle") return apply_settle(sender, p);
  fail(ErrorCode::UnknownOp, op);
}

// ---- economics ops ----

void Ledger::fund(AgentId agent, Amount amount) {
  append("fund", agent, json{{"agent", agent}, {"amount", amount}});
}

void Ledger::apply_fund(AgentId, const json& p) {
  econ_.fund(p.at("agent").get<AgentId>(), p.at("amount").get<Amount>());
}

econ::StakeId Ledger::stake(AgentId agent, Amount value, const Ratio& tax_rate) {
  append("stake", agent,
         json{{"agent", agent}, {"tax_rate", ratio_json(tax_rate)}, {"value", value}});
  return econ_.next_stake_id - 1;
}

void Ledger::apply_stake(AgentId sender, const json& p) {
  AgentId agent = p.at("agent").get<AgentId>();
  if (agent != sender) fail(ErrorCode::NotOwner, "stake sender mismatch");
  Ratio rate{p.at("tax_rate").at("num").get<std::int64_t>(),
             p.at("tax_rate").at("den").get<std::int64_t>()};
  econ_.stake(agent, p.at("value").get<Amount>(), rate);
}

void Ledger::reassess_stake(AgentId sender, econ::StakeId id, Amount value) {
  append("reassess_stake", sender, json{{"stake", id}, {"value", value}});
}

void Ledger::apply_reassess(AgentId sender, const json& p) {
  econ_.reassess(sender, p.at("stake").get<econ::StakeId>(), p.at("value").get<Amount>());
}

Amount Ledger::charge_tax(std::uint32_t epoch, const Ratio& tax_rate) {
  Amount before = econ_.public_goods_pool;
  append("charge_tax", kOwnerAgent,
         json{{"epoch", epoch}, {"tax_rate", ratio_json(tax_rate)}});
  return econ_.public_goods_pool - before;
}

void Ledger::apply_charge_tax(AgentId, const json& p) {
  Ratio rate{p.at("tax_rate").at("num").get<std::int64_t>(),
             p.at("tax_rate").at("den").get<std::int64_t>()};
  econ_.charge_tax(rate);
}

void Ledger::force_sale(AgentId buyer, econ::StakeId id) {
  append("force_sale", buyer, json{{"buyer", buyer}, {"stake", id}});
}

void Ledger::apply_force_sale(AgentId sender, const json& p) {
  AgentId buyer = p.at("buyer").get<AgentId>();
  if (buyer != sender) fail(ErrorCode::NotOwner, "force_sale sender mismatch");
  econ_.force_sale(buyer, p.at("stake").get<econ::StakeId>());
}

Amount Ledger::slash(AgentId evaluator, const Ratio& fraction) {
  Amount before = econ_.public_goods_pool;
  append("slash", kOwnerAgent,
         json{{"evaluator", evaluator}, {"fraction", ratio_json(fraction)}});
  return econ_.public_goods_pool - before;
}

void Ledger::apply_slash(AgentId, const json& p) {
  Ratio fraction{p.at("fraction").at("num").get<std::int64_t>(),
                 p.at("fraction").at("den").get<std::int64_t>()};
  econ_.slash(p.at("evaluator").get<AgentId>(), fraction);
}

// ---- task ops ----

void Ledger::deploy_task(AgentId owner, const TaskConfig& config,
                         const std::string& genesis_cid, Amount deposit,
                         std::vector<AgentId> roster) {
  std::sort(roster.begin(), roster.end());
  json payload{{"config",
                json{{"acceptable_bound", config.acceptable_bound},
                     {"evaluator_ratio", ratio_json(config.evaluator_ratio)},
                     {"fee_split", ratio_json(config.fee_split_participants)},
                     {"k_min_subgroup", config.k_min_subgroup},
                     {"metric", static_cast<int>(config.metric)},
                     {"model_kind", static_cast<int>(config.model_kind)},
                     {"reward_pool", config.reward_pool},
                     {"rounds_max", config.rounds_max},
                     {"shamir_threshold", config.shamir_threshold},
                     {"task_id", config.task_id}}},
               {"deposit", deposit},
               {"genesis", genesis_cid},
               {"roster", roster}};
  append("deploy_task", owner, std::move(payload));
}

void Ledger::apply_deploy(AgentId sender, const json& p) {
  if (task_) fail(ErrorCode::WrongPhase, "a task is already deployed");

  TaskConfig config;
  const json& c = p.at("config");
  config.task_id = c.at("task_id").get<TaskId>();
  config.rounds_max = c.at("rounds_max").get<std::uint32_t>();
  config.k_min_subgroup = c.at("k_min_subgroup").get<std::uint32_t>();
  config.evaluator_ratio = Ratio{c.at("evaluator_ratio").at("num").get<std::int64_t>(),
                                 c.at("evaluator_ratio").at("den").get<std::int64_t>()};
  config.reward_pool = c.at("reward_pool").get<Amount>();
  config.fee_split_participants = Ratio{c.at("fee_split").at("num").get<std::int64_t>(),
                                        c.at("fee_split").at("den").get<std::int64_t>()};
  config.acceptable_bound = c.at("acceptable_bound").get<ScoreMicro>();
  config.shamir_threshold = c.at("shamir_threshold").get<std::uint32_t>();
  config.model_kind = static_cast<fl::ModelKind>(c.at("model_kind").get<int>());
  config.metric = static_cast<audit::MetricKind>(c.at("metric").get<int>());
  config.validate();

  Amount deposit = p.at("deposit").get<Amount>();
  if (deposit < config.reward_pool)
    fail(ErrorCode::InsufficientDeposit, "deposit " + std::to_string(deposit) +
                                             " below reward pool " +
                                             std::to_string(config.reward_pool));
  if (deposit != config.reward_pool)
    fail(ErrorCode::InvalidConfig, "deposit must equal the reward pool");

  auto roster = p.at("roster").get<std::vector<AgentId>>();
  std::sort(roster.begin(), roster.end());
  if (std::adjacent_find(roster.begin(), roster.end()) != roster.end())
    fail(ErrorCode::DuplicateRegistration, "duplicate participant in roster");
  if (roster.size() < config.k_min_subgroup)
    fail(ErrorCode::TooFewParticipants,
         std::to_string(roster.size()) + " participants, need " +
             std::to_string(config.k_min_subgroup));
  if (std::binary_search(roster.begin(), roster.end(), sender))
    fail(ErrorCode::InvalidConfig, "owner cannot participate in its own task");

  std::string genesis = p.at("genesis").get<std::string>();
  if (genesis.size() != 64) fail(ErrorCode::InvalidConfig, "genesis cid must be a digest");

  if (econ_.balance_of(sender) < deposit)
    fail(ErrorCode::InsufficientBalance, "owner cannot escrow the reward pool");

  econ_.balances[sender] -= deposit;

  TaskState t;
  t.config = config;
  t.owner = sender;
  t.phase = Phase::Deployed;
  t.genesis_model = genesis;
  t.escrow = deposit;
  t.roster = std::move(roster);
  task_ = std::move(t);
  push_event("TaskDeployed", "pool " + std::to_string(deposit));
}

void Ledger::begin_round(AgentId sender, std::uint32_t round,
                         const std::vector<std::vector<AgentId>>& partition) {
  json groups = json::array();
  for (const auto& g : partition) groups.push_back(g);
  append("begin_round", sender, json{{"partition", groups}, {"round", round}});
}

void Ledger::apply_begin_round(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  if (sender != t.owner) fail(ErrorCode::NotOwner, "rounds are opened by the task owner");

  auto round = p.at("round").get<std::uint32_t>();
  bool ok = false;
  if (t.phase == Phase::Deployed) {
    ok = round == 1;
  } else if (t.phase == Phase::Aggregating) {
    ok = !t.round(t.current_round).global_model.empty() && round == t.current_round + 1 &&
         (t.final_round == 0);
  } else if (t.phase == Phase::FinalSignaled) {
    ok = round == t.final_round;
  }
  if (!ok)
    fail(ErrorCode::WrongPhase, "cannot open round " + std::to_string(round) + " from " +
                                    phase_name(t.phase));
  if (round > t.config.rounds_max)
    fail(ErrorCode::WrongPhase, "rounds_max exhausted");

  std::vector<std::vector<AgentId>> partition;
  for (const auto& g : p.at("partition")) partition.push_back(g.get<std::vector<AgentId>>());

  std::vector<AgentId> seen;
  for (const auto& group : partition) {
    if (group.size() < t.config.k_min_subgroup)
      fail(ErrorCode::InvalidConfig, "subgroup below k_min");
    if (group.size() < t.config.shamir_threshold ||
        2ull * t.config.shamir_threshold <= group.size())
      fail(ErrorCode::InvalidConfig, "shamir threshold does not fit subgroup of " +
                                         std::to_string(group.size()));
    for (AgentId a : group) seen.push_back(a);
  }
  std::sort(seen.begin(), seen.end());
  if (seen != t.roster)
    fail(ErrorCode::InvalidConfig, "partition must cover the roster exactly");

  RoundState rs;
  rs.subgroups.resize(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    rs.subgroups[i].members = partition[i];
    std::sort(rs.subgroups[i].members.begin(), rs.subgroups[i].members.end());
  }
  t.rounds[round] = std::move(rs);
  t.current_round = round;
  t.phase = Phase::Training;
  push_event("RoundOpened", std::to_string(partition.size()) + " subgroups");
}

void Ledger::register_update(AgentId participant, std::uint32_t round, const std::string& cid) {
  append("register_update", participant,
         json{{"cid", cid}, {"participant", participant}, {"round", round}});
}

void Ledger::apply_register_update(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Training, "register_update");
  auto participant = p.at("participant").get<AgentId>();
  if (participant != sender) fail(ErrorCode::NotOwner, "register_update sender mismatch");
  auto round = p.at("round").get<std::uint32_t>();
  if (round != t.current_round)
    fail(ErrorCode::WrongPhase, "round " + std::to_string(round) + " is not open");
  if (!std::binary_search(t.roster.begin(), t.roster.end(), participant))
    fail(ErrorCode::UnknownParticipant, "agent " + std::to_string(participant));
  std::string cid = p.at("cid").get<std::string>();
  if (cid.size() != 64) fail(ErrorCode::InvalidConfig, "cid must be a digest");
  RoundState& rs = t.round(round);
  if (rs.updates.count(participant))
    fail(ErrorCode::DuplicateRegistration,
         "model hash for agent " + std::to_string(participant) +
             " is write-once per round");
  rs.updates[participant] = cid;
}

void Ledger::check_availability(AgentId sender, std::uint32_t round, std::uint32_t subgroup,
                                const std::map<AgentId, std::vector<AgentId>>& loads) {
  json jloads = json::object();
  for (const auto& [agent, list] : loads) jloads[std::to_string(agent)] = list;
  append("check_availability", sender,
         json{{"loads", jloads}, {"round", round}, {"subgroup", subgroup}});
}

void Ledger::apply_check_availability(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Training, "check_availability");
  if (sender != t.owner) fail(ErrorCode::NotOwner, "availability is tallied by the owner");
  auto round = p.at("round").get<std::uint32_t>();
  if (round != t.current_round) fail(ErrorCode::WrongPhase, "round not open");
  auto index = p.at("subgroup").get<std::uint32_t>();
  RoundState& rs = t.round(round);
  if (index >= rs.subgroups.size()) fail(ErrorCode::OutOfRange, "no such subgroup");
  SubgroupState& sg = rs.subgroups[index];
  if (sg.availability_checked)
    fail(ErrorCode::DuplicateRegistration, "availability already checked");

  // the round's universe: members that registered an update in time
  std::vector<AgentId> registered;
  for (AgentId m : sg.members)
    if (rs.updates.count(m)) registered.push_back(m);

  std::map<AgentId, std::vector<AgentId>> loads;
  for (const auto& [key, list] : p.at("loads").items()) {
    AgentId agent = static_cast<AgentId>(std::stoul(key));
    loads[agent] = list.get<std::vector<AgentId>>();
  }
  for (const auto& [agent, list] : loads) {
    if (!std::binary_search(registered.begin(), registered.end(), agent))
      fail(ErrorCode::UnknownParticipant, "load report from non-registered agent");
    for (AgentId target : list)
      if (!std::binary_search(registered.begin(), registered.end(), target))
        fail(ErrorCode::UnknownParticipant, "load report names non-registered agent");
  }

  // Admission needs a strict majority both ways: the participant loads
  // more than half of the subgroup's models, and more than half of the
  // other members can load the participant's model.
  std::size_t n = registered.size();
  std::vector<AgentId> admitted;
  for (AgentId m : registered) {
    std::size_t loads_m = 0;
    auto it = loads.find(m);
    if (it != loads.end()) loads_m = it->second.size();
    std::size_t loaded_by_others = 0;
    for (const auto& [other, list] : loads) {
      if (other == m) continue;
      if (std::find(list.begin(), list.end(), m) != list.end()) ++loaded_by_others;
    }
    if (2 * loads_m > n && 2 * loaded_by_others > n) {
      admitted.push_back(m);
    } else {
      push_event("AvailabilityExclusion",
                 "agent " + std::to_string(m) + " subgroup " + std::to_string(index));
    }
  }
  sg.admitted = std::move(admitted);
  sg.availability_checked = true;
}

void Ledger::record_subgroup_aggregate(AgentId sender, std::uint32_t round,
                                       std::uint32_t subgroup, const std::string& cid,
                                       std::uint32_t count) {
  append("record_subgroup_aggregate", sender,
         json{{"cid", cid}, {"count", count}, {"round", round}, {"subgroup", subgroup}});
}

static void require_aggregation_open(TaskState& t, std::uint32_t round) {
  if (round != t.current_round) fail(ErrorCode::WrongPhase, "round not open");
  if (t.phase == Phase::Training) {
    for (const auto& sg : t.round(round).subgroups)
      if (!sg.availability_checked)
        fail(ErrorCode::WrongPhase, "availability checks incomplete");
    t.phase = Phase::Aggregating;
  } else if (t.phase != Phase::Aggregating) {
    fail(ErrorCode::WrongPhase, "aggregation requires an open round, phase is " +
                                    std::string(phase_name(t.phase)));
  }
}

void Ledger::apply_record_aggregate(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  if (sender != t.owner) fail(ErrorCode::NotOwner, "aggregates are recorded by the owner");
  auto round = p.at("round").get<std::uint32_t>();
  auto index = p.at("subgroup").get<std::uint32_t>();
  require_aggregation_open(t, round);
  RoundState& rs = t.round(round);
  if (index >= rs.subgroups.size()) fail(ErrorCode::OutOfRange, "no such subgroup");
  if (rs.aggregates.count(index) || rs.aborted_subgroups.count(index))
    fail(ErrorCode::DuplicateRegistration, "subgroup already resolved");
  auto count = p.at("count").get<std::uint32_t>();
  if (count == 0 || count > rs.subgroups[index].admitted.size())
    fail(ErrorCode::OutOfRange, "implausible aggregate count");
  std::string cid = p.at("cid").get<std::string>();
  if (cid.size() != 64) fail(ErrorCode::InvalidConfig, "cid must be a digest");
  rs.aggregates[index] = cid;
  rs.aggregate_counts[index] = count;
}

void Ledger::abort_subgroup(AgentId sender, std::uint32_t round, std::uint32_t subgroup,
                            const std::string& reason) {
  append("abort_subgroup", sender,
         json{{"reason", reason}, {"round", round}, {"subgroup", subgroup}});
}

void Ledger::apply_abort_subgroup(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  if (sender != t.owner) fail(ErrorCode::NotOwner, "aborts are recorded by the owner");
  auto round = p.at("round").get<std::uint32_t>();
  auto index = p.at("subgroup").get<std::uint32_t>();
  require_aggregation_open(t, round);
  RoundState& rs = t.round(round);
  if (index >= rs.subgroups.size()) fail(ErrorCode::OutOfRange, "no such subgroup");
  if (rs.aggregates.count(index) || rs.aborted_subgroups.count(index))
    fail(ErrorCode::DuplicateRegistration, "subgroup already resolved");
  rs.aborted_subgroups.insert(index);
  push_event("SubgroupAborted", "subgroup " + std::to_string(index) + ": " +
                                    p.at("reason").get<std::string>());
}

void Ledger::record_global_model(AgentId sender, std::uint32_t round, const std::string& cid) {
  append("record_global_model", sender, json{{"cid", cid}, {"round", round}});
}

void Ledger::apply_record_global(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  if (sender != t.owner) fail(ErrorCode::NotOwner, "globals are recorded by the owner");
  require_phase(Phase::Aggregating, "record_global_model");
  auto round = p.at("round").get<std::uint32_t>();
  if (round != t.current_round) fail(ErrorCode::WrongPhase, "round not open");
  RoundState& rs = t.round(round);
  if (!rs.global_model.empty() || (!t.sealed_final_model.empty() && round == t.final_round))
    fail(ErrorCode::DuplicateRegistration, "global already recorded");
  for (std::uint32_t i = 0; i < rs.subgroups.size(); ++i)
    if (!rs.aggregates.count(i) && !rs.aborted_subgroups.count(i))
      fail(ErrorCode::WrongPhase, "subgroup " + std::to_string(i) + " unresolved");
  std::string cid = p.at("cid").get<std::string>();
  if (cid.size() != 64) fail(ErrorCode::InvalidConfig, "cid must be a digest");

  if (t.final_round != 0 && round == t.final_round) {
    // the final global stays sealed until rewards are settled
    t.sealed_final_model = cid;
    t.phase = Phase::Evaluating;
    push_event("FinalModelSealed", "");
  } else {
    rs.global_model = cid;
    if (t.final_round != 0 && round + 1 == t.final_round) {
      t.phase = Phase::FinalSignaled;
      push_event("FinalRoundPending", "round " + std::to_string(t.final_round));
    }
  }
}

void Ledger::signal_final_round(AgentId sender) {
  append("signal_final_round", sender, json::object());
}

void Ledger::apply_signal_final(AgentId sender, const json&) {
  TaskState& t = mutable_task();
  if (sender != t.owner) fail(ErrorCode::NotOwner, "only the owner signals the final round");
  if (t.phase != Phase::Training && t.phase != Phase::Aggregating)
    fail(ErrorCode::WrongPhase, "signal requires an open training round");
  if (t.final_round != 0) fail(ErrorCode::WrongPhase, "final round already signaled");
  if (t.current_round + 1 > t.config.rounds_max)
    fail(ErrorCode::InvalidConfig, "rounds_max leaves no room for the evaluation round");
  t.final_round = t.current_round + 1;
  push_event("FinalRoundSignaled", "evaluation in round " + std::to_string(t.final_round));
  if (t.phase == Phase::Aggregating && !t.round(t.current_round).global_model.empty()) {
    t.phase = Phase::FinalSignaled;
    push_event("FinalRoundPending", "round " + std::to_string(t.final_round));
  }
}

void Ledger::register_eval_model(AgentId participant, const std::string& cid) {
  append("register_eval_model", participant, json{{"cid", cid}, {"participant", participant}});
}

void Ledger::apply_register_eval(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Training, "register_eval_model");
  if (t.final_round == 0 || t.current_round != t.final_round)
    fail(ErrorCode::WrongPhase, "evaluation models belong to the final round");
  auto participant = p.at("participant").get<AgentId>();
  if (participant != sender) fail(ErrorCode::NotOwner, "register_eval_model sender mismatch");
  if (!std::binary_search(t.roster.begin(), t.roster.end(), participant))
    fail(ErrorCode::UnknownParticipant, "agent " + std::to_string(participant));
  if (t.eval_registry.count(participant))
    fail(ErrorCode::DuplicateRegistration, "evaluation model is write-once");
  std::string cid = p.at("cid").get<std::string>();
  if (cid.size() != 64) fail(ErrorCode::InvalidConfig, "cid must be a digest");
  t.eval_registry[participant] = cid;
}

void Ledger::begin_evaluation(AgentId sender, const std::string& control_digest_hex,
                              const std::vector<std::vector<AgentId>>& assignment) {
  json groups = json::array();
  for (const auto& g : assignment) groups.push_back(g);
  append("begin_evaluation", sender,
         json{{"assignment", groups}, {"control_digest", control_digest_hex}});
}

void Ledger::apply_begin_evaluation(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Evaluating, "begin_evaluation");
  if (sender != t.owner) fail(ErrorCode::NotOwner, "evaluation is opened by the owner");
  if (!t.control_digest.empty())
    fail(ErrorCode::DuplicateRegistration, "evaluation already opened");
  std::string digest = p.at("control_digest").get<std::string>();
  if (digest.size() != 64) fail(ErrorCode::InvalidConfig, "control digest");

  RoundState& rs = t.round(t.final_round);
  std::vector<std::vector<AgentId>> assignment;
  for (const auto& g : p.at("assignment")) assignment.push_back(g.get<std::vector<AgentId>>());
  if (assignment.size() != rs.subgroups.size())
    fail(ErrorCode::InvalidConfig, "assignment does not match subgroups");

  std::set<AgentId> seen;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto& evaluators = assignment[i];
    auto needed = static_cast<std::size_t>(t.config.evaluator_ratio.mul_ceil(
        static_cast<std::int64_t>(rs.subgroups[i].members.size())));
    if (evaluators.size() != needed)
      fail(ErrorCode::InsufficientEvaluators,
           "subgroup " + std::to_string(i) + " needs " + std::to_string(needed) +
               " evaluators");
    for (AgentId e : evaluators) {
      if (!seen.insert(e).second)
        fail(ErrorCode::InvalidConfig, "evaluator assigned to two subgroups");
      if (std::binary_search(t.roster.begin(), t.roster.end(), e) || e == t.owner)
        fail(ErrorCode::InvalidConfig, "evaluator roles must be disjoint from the task");
      if (!econ_.has_active_stake(e))
        fail(ErrorCode::InsufficientEvaluators,
             "evaluator " + std::to_string(e) + " holds no active stake");
    }
  }
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    rs.subgroups[i].evaluators = assignment[i];
    std::sort(rs.subgroups[i].evaluators.begin(), rs.subgroups[i].evaluators.end());
  }
  t.control_digest = digest;
  push_event("EvaluationOpened", "");
}

SubgroupState& Ledger::subgroup_for_eval(std::uint32_t index) {
  TaskState& t = mutable_task();
  RoundState& rs = t.round(t.final_round);
  if (index >= rs.subgroups.size()) fail(ErrorCode::OutOfRange, "no such subgroup");
  return rs.subgroups[index];
}

// participants an evaluator is expected to report on: admitted in the
// final round with a delivered evaluation model
static std::vector<AgentId> scoreable_members(const TaskState& t, const SubgroupState& sg) {
  std::vector<AgentId> out;
  for (AgentId m : sg.admitted)
    if (t.eval_registry.count(m)) out.push_back(m);
  return out;
}

static const SubgroupState* find_subgroup_of(const TaskState& t, AgentId participant,
                                             std::uint32_t* index_out) {
  const RoundState& rs = t.round(t.final_round);
  for (std::uint32_t i = 0; i < rs.subgroups.size(); ++i) {
    const auto& members = rs.subgroups[i].members;
    if (std::binary_search(members.begin(), members.end(), participant)) {
      if (index_out) *index_out = i;
      return &rs.subgroups[i];
    }
  }
  return nullptr;
}

static std::string pair_key(AgentId evaluator, AgentId participant) {
  return std::to_string(evaluator) + ":" + std::to_string(participant);
}

void Ledger::commit_score(AgentId evaluator, AgentId participant, const Digest256& commitment) {
  append("commit_score", evaluator,
         json{{"commitment", commitment.hex()},
              {"evaluator", evaluator},
              {"participant", participant}});
}

void Ledger::apply_commit(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Evaluating, "commit_score");
  if (t.control_digest.empty()) fail(ErrorCode::WrongPhase, "evaluation not opened");
  auto evaluator = p.at("evaluator").get<AgentId>();
  if (evaluator != sender) fail(ErrorCode::NotOwner, "commit sender mismatch");
  auto participant = p.at("participant").get<AgentId>();

  std::uint32_t index = 0;
  const SubgroupState* found = find_subgroup_of(t, participant, &index);
  if (!found) fail(ErrorCode::UnknownParticipant, "agent " + std::to_string(participant));
  SubgroupState& sg = subgroup_for_eval(index);
  if (!std::binary_search(sg.evaluators.begin(), sg.evaluators.end(), evaluator))
    fail(ErrorCode::NotAssigned, "evaluator " + std::to_string(evaluator) +
                                     " is not assigned subgroup " + std::to_string(index));
  std::vector<AgentId> scoreable = scoreable_members(t, sg);
  if (!std::binary_search(scoreable.begin(), scoreable.end(), participant))
    fail(ErrorCode::UnknownParticipant,
         "participant " + std::to_string(participant) + " is not scoreable");
  if (sg.commits_closed) fail(ErrorCode::WrongPhase, "commit phase closed");
  std::string key = pair_key(evaluator, participant);
  if (sg.commits.count(key)) fail(ErrorCode::DuplicateCommit, key);
  sg.commits[key] = p.at("commitment").get<std::string>();

  // close automatically once every assigned evaluator committed on every
  // scoreable participant
  bool complete = true;
  for (AgentId e : sg.evaluators) {
    for (AgentId m : scoreable) {
      if (!sg.commits.count(pair_key(e, m))) {
        complete = false;
        break;
      }
    }
    if (!complete) break;
  }
  if (complete) {
    sg.commits_closed = true;
    push_event("CommitPhaseClosed", "subgroup " + std::to_string(index));
  }
}

void Ledger::close_commits(AgentId sender, std::uint32_t subgroup) {
  append("close_commits", sender, json{{"subgroup", subgroup}});
}

void Ledger::apply_close_commits(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Evaluating, "close_commits");
  if (sender != t.owner) fail(ErrorCode::NotOwner, "timeouts are declared by the owner");
  auto index = p.at("subgroup").get<std::uint32_t>();
  SubgroupState& sg = subgroup_for_eval(index);
  if (sg.commits_closed) fail(ErrorCode::DuplicateRegistration, "commit phase already closed");
  sg.commits_closed = true;
  push_event("CommitTimeout", "subgroup " + std::to_string(index));
}

RevealResult Ledger::reveal_score(AgentId evaluator, AgentId participant, ScoreMicro score,
                                  const std::string& salt_hex, const audit::Attestation& att,
                                  bool has_attestation) {
  json payload{{"attestation", attestation_json(att)},
               {"evaluator", evaluator},
               {"has_attestation", has_attestation},
               {"participant", participant},
               {"salt", salt_hex},
               {"score", score}};
  // validate first; only loggable outcomes may mutate
  RevealResult result = apply_reveal(evaluator, payload);
  Transaction tx;
  tx.height = ++height_;
  tx.sender = evaluator;
  tx.op = "reveal_score";
  tx.payload = std::move(payload);
  tx.state_digest = state_digest_hex();
  log_.push_back(std::move(tx));
  return result;
}

RevealResult Ledger::apply_reveal(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Evaluating, "reveal_score");
  auto evaluator = p.at("evaluator").get<AgentId>();
  if (evaluator != sender) fail(ErrorCode::NotOwner, "reveal sender mismatch");
  auto participant = p.at("participant").get<AgentId>();
  auto score = p.at("score").get<ScoreMicro>();
  if (score < 0 || score > kScoreOne) fail(ErrorCode::OutOfRange, "score outside [0, 1]");

  std::uint32_t index = 0;
  if (!find_subgroup_of(t, participant, &index))
    fail(ErrorCode::UnknownParticipant, "agent " + std::to_string(participant));
  SubgroupState& sg = subgroup_for_eval(index);
  if (!std::binary_search(sg.evaluators.begin(), sg.evaluators.end(), evaluator))
    fail(ErrorCode::NotAssigned, "evaluator " + std::to_string(evaluator));
  if (!sg.commits_closed)
    fail(ErrorCode::CommitPhaseOpen,
         "reveals open once every evaluator of the subgroup has committed");
  for (const auto& r : sg.reveals)
    if (r.evaluator == evaluator && r.participant == participant)
      fail(ErrorCode::DuplicateRegistration, "already revealed");

  std::string salt = p.at("salt").get<std::string>();
  std::string key = pair_key(evaluator, participant);
  auto commit_it = sg.commits.find(key);
  bool matches = commit_it != sg.commits.end() &&
                 commitment_digest(score, salt).hex() == commit_it->second;
  if (!matches) {
    // a tampered or commitment-less reveal is itself evidence; record it
    t.slash_flagged.insert(evaluator);
    push_event("RevealMismatch", key);
    return RevealResult::Mismatch;
  }

  bool has_att = p.at("has_attestation").get<bool>();
  if (!has_att) {
    push_event("MissingAttestation", key);
    return RevealResult::MissingAttestation;
  }

  RevealRecord record;
  record.evaluator = evaluator;
  record.participant = participant;
  record.score = score;
  record.salt_hex = salt;
  record.attestation = attestation_from_json(p.at("attestation"));
  record.has_attestation = true;
  sg.reveals.push_back(std::move(record));
  return RevealResult::Accepted;
}

void Ledger::verify_attestations(AgentId sender, std::uint32_t subgroup,
                                 const std::map<std::string, bool>& verdicts) {
  json jv = json::object();
  for (const auto& [key, ok] : verdicts) jv[key] = ok;
  append("verify_attestations", sender, json{{"subgroup", subgroup}, {"verdicts", jv}});
}

void Ledger::apply_verify_attestations(AgentId sender, const json& p) {
  TaskState& t = mutable_task();
  require_phase(Phase::Evaluating, "verify_attestations");
  if (sender != t.owner) fail(ErrorCode::NotOwner, "verification is tallied by the owner");
  auto index = p.at("subgroup").get<std::uint32_t>();
  SubgroupState& sg = subgroup_for_eval(index);
  if (!sg.commits_closed) fail(ErrorCode::WrongPhase, "commit phase still open");
  if (sg.attestations_verified)
    fail(ErrorCode::DuplicateRegistration, "attestations already verified");

  const json& verdicts = p.at("verdicts");
  std::vector<AgentId> scoreable = scoreable_members(t, sg);

  // per-report validity: the recorded oracle verdict, plus agreement on
  // the control dataset actually deployed
  for (auto& r : sg.reveals) {
    std::string key = pair_key(r.evaluator, r.participant);
    bool oracle_ok = verdicts.contains(key) && verdicts.at(key).get<bool>();
    bool digest_ok = r.attestation.control_digest.hex() == t.control_digest;
    r.verdict = oracle_ok && digest_ok;
    if (!r.verdict) {
      t.slash_flagged.insert(r.evaluator);
      push_event("AttestationRejected", key);
    }
  }

  // evaluator-level consensus: a strict majority of the subgroup's
  // evaluators must have produced fully verifying report sets
  std::size_t ok_evaluators = 0;
  for (AgentId e : sg.evaluators) {
    std::size_t verified = 0;
    for (const auto& r : sg.reveals)
      if (r.evaluator == e && r.verdict) ++verified;
    bool complete = verified == scoreable.size();
    if (complete && !scoreable.empty()) ++ok_evaluators;
    // silence or partial reveals are abstention
    std::size_t revealed = 0;
    for (const auto& r : sg.reveals)
      if (r.evaluator == e) ++revealed;
    if (revealed < scoreable.size()) t.abstained.insert(e);
  }

  bool majority = 2 * ok_evaluators > sg.evaluators.size();
  if (majority) {
    for (auto& r : sg.reveals) r.accepted = r.verdict;
  } else {
    sg.voided = true;
    for (auto& r : sg.reveals) r.accepted = false;
    push_event("DisputeEscalation",
               "subgroup " + std::to_string(index) + " failed attestation consensus");
  }
  sg.attestations_verified = true;
}

void Ledger::settle(AgentId sender) { append("settle", sender, json::object()); }

void Ledger::apply_settle(AgentId sender, const json&) {
  TaskState& t = mutable_task();
  require_phase(Phase::Evaluating, "settle");
  if (sender != t.owner) fail(ErrorCode::NotOwner, "settlement is triggered by the owner");
  if (t.control_digest.empty()) fail(ErrorCode::ScoresIncomplete, "evaluation never opened");
  RoundState& rs = t.round(t.final_round);
  for (std::uint32_t i = 0; i < rs.subgroups.size(); ++i) {
    const SubgroupState& sg = rs.subgroups[i];
    if (!sg.commits_closed || !sg.attestations_verified)
      fail(ErrorCode::ScoresIncomplete, "subgroup " + std::to_string(i) + " not finished");
  }

  // participant overall scores
  for (const SubgroupState& sg : rs.subgroups) {
    std::vector<AgentId> scoreable = scoreable_members(t, sg);
    for (AgentId m : sg.members) {
      ParticipantScore ps;
      bool in_scoreable = std::binary_search(scoreable.begin(), scoreable.end(), m);
      if (!in_scoreable) {
        // excluded by availability or never delivered a model
        ps.raw_overall = 0;
        ps.overall = 0;
        ps.eliminated = true;
      } else {
        std::vector<ScoreMicro> accepted;
        for (const auto& r : sg.reveals)
          if (r.participant == m && r.accepted) accepted.push_back(r.score);
        ps.accepted_reports = static_cast<std::uint32_t>(accepted.size());
        ps.raw_overall = audit::participant_overall_score(accepted);
        ps.overall = audit::apply_bound_filter(ps.raw_overall, t.config.acceptable_bound);
        ps.eliminated = ps.raw_overall < t.config.acceptable_bound;
      }
      t.participant_scores[m] = ps;
    }
  }

  // evaluator credits against each participant's accepted-score median
  std::map<AgentId, std::vector<std::int64_t>> credits;
  for (const SubgroupState& sg : rs.subgroups) {
    for (AgentId e : sg.evaluators) credits[e];  // assigned evaluators always appear
    if (sg.voided) continue;
    std::vector<AgentId> scoreable = scoreable_members(t, sg);
    for (AgentId m : scoreable) {
      std::vector<ScoreMicro> accepted;
      for (const auto& r : sg.reveals)
        if (r.participant == m && r.accepted) accepted.push_back(r.score);
      if (accepted.empty()) continue;
      audit::Median2 med = audit::median2(accepted);
      for (const auto& r : sg.reveals)
        if (r.participant == m && r.accepted)
          credits[r.evaluator].push_back(audit::report_credit2(r.score, med));
    }
  }
  for (const auto& [e, list] : credits) t.evaluator_scores[e] = audit::evaluator_score(list);

  // integer settlement: pure pro-rata with floors, remainders to the
  // public-goods pool
  Amount pool = t.escrow;
  Amount pool_p = t.config.fee_split_participants.mul_floor(pool);
  Amount pool_e = pool - pool_p;

  __int128 wsum = 0;
  for (const auto& [m, ps] : t.participant_scores) wsum += ps.overall;
  __int128 vsum = 0;
  for (const auto& [e, s] : t.evaluator_scores) vsum += s;

  Amount paid = 0;
  if (wsum > 0) {
    for (const auto& [m, ps] : t.participant_scores) {
      if (ps.overall <= 0) continue;
      Amount share = static_cast<Amount>(static_cast<__int128>(pool_p) * ps.overall / wsum);
      if (share > 0) {
        t.payouts[m] += share;
        paid += share;
      }
    }
  }
  if (vsum > 0) {
    for (const auto& [e, s] : t.evaluator_scores) {
      if (s <= 0) continue;
      Amount share = static_cast<Amount>(static_cast<__int128>(pool_e) * s / vsum);
      if (share > 0) {
        t.payouts[e] += share;
        paid += share;
      }
    }
  }
  Amount remainder = pool - paid;
  for (const auto& [agent, amount] : t.payouts) econ_.balances[agent] += amount;
  econ_.public_goods_pool += remainder;
  t.public_goods_remainder = remainder;
  t.escrow = 0;

  t.phase = Phase::Settled;
  t.final_revealed = true;
  push_event("TaskSettled", "paid " + std::to_string(paid) + ", public goods " +
                                std::to_string(remainder));
  push_event("FinalModelRevealed", t.sealed_final_model);
}

const std::string& Ledger::final_model_cid(AgentId) const {
  const TaskState& t = task();
  if (t.phase != Phase::Settled)
    fail(ErrorCode::WrongPhase, "final model is sealed until settlement");
  return t.sealed_final_model;
}

bool Ledger::conserved() const {
  Amount escrow = task_ ? task_->escrow : 0;
  return econ_.total_balances() + econ_.public_goods_pool + escrow == econ_.total_issued;
}

void Ledger::export_log(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::NotFound, "cannot write " + path);
  for (const auto& tx : log_) out << tx.to_line() << "\n";
}

Ledger Ledger::replay(const std::vector<Transaction>& log) {
  Ledger fresh;
  for (const auto& tx : log) {
    fresh.apply(tx.op, tx.sender, tx.payload);
    ++fresh.height_;
    std::string digest = fresh.state_digest_hex();
    if (digest != tx.state_digest)
      fail(ErrorCode::ReplayMismatch,
           "divergence at height " + std::to_string(tx.height) + " (" + tx.op + ")");
    Transaction copy = tx;
    fresh.log_.push_back(std::move(copy));
  }
  return fresh;
}

Ledger Ledger::replay_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::NotFound, "cannot read " + path);
  std::vector<Transaction> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    log.push_back(Transaction::from_line(line));
  }
  return replay(log);
}

}  // namespace chain
}  // namespace din
