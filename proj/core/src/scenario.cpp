#include "din/scenario.hpp"

#include <fstream>

namespace din {
namespace scen {

using nlohmann::json;

const char* threat_tag_name(ThreatTag tag) {
  return tag == ThreatTag::within_threat_model ? "within_threat_model" : "out_of_model";
}

ThreatTag threat_tag_from(const std::string& name) {
  if (name == "within_threat_model") return ThreatTag::within_threat_model;
  if (name == "out_of_model") return ThreatTag::out_of_model;
  fail(ErrorCode::ScenarioInvalid, "unknown threat tag: " + name);
}

std::vector<AgentId> Scenario::participant_ids() const {
  std::vector<AgentId> out;
  for (std::uint32_t i = 1; i <= population.participants; ++i) out.push_back(i);
  return out;
}

std::vector<AgentId> Scenario::evaluator_ids() const {
  std::vector<AgentId> out;
  for (std::uint32_t i = 0; i < economics.evaluators; ++i)
    out.push_back(population.participants + 1 + i);
  return out;
}

std::uint32_t Scenario::agent_count() const {
  return 1 + population.participants + economics.evaluators;
}

std::vector<std::size_t> Scenario::expected_subgroup_sizes() const {
  std::size_t n = population.participants;
  std::size_t k = task.k_min_subgroup;
  std::vector<std::size_t> sizes;
  if (k == 0 || n < k) return sizes;
  std::size_t groups = n / k;
  std::size_t base = n / groups;
  std::size_t extra = n % groups;
  for (std::size_t g = 0; g < groups; ++g) sizes.push_back(base + (g < extra ? 1 : 0));
  return sizes;
}

std::size_t Scenario::evaluators_needed() const {
  std::size_t total = 0;
  for (std::size_t s : expected_subgroup_sizes())
    total += static_cast<std::size_t>(task.evaluator_ratio.mul_ceil(static_cast<std::int64_t>(s)));
  return total;
}

static void invalid(const std::string& what) { fail(ErrorCode::ScenarioInvalid, what); }

void Scenario::validate() const {
  if (name.empty()) invalid("scenario needs a name");
  for (char c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      invalid("scenario name must be filesystem-safe");

  const auto& pop = population;
  if (pop.participants < 1) invalid("population.participants must be >= 1");
  if (pop.participants > 1000) invalid("population.participants capped at 1000");
  if (pop.samples_per_participant < 1) invalid("population.samples_per_participant must be >= 1");
  if (pop.feature_dim < 1 || pop.feature_dim > 256) invalid("population.feature_dim outside [1, 256]");
  if (pop.label_noise < 0.0 || pop.label_noise > 1.0) invalid("population.label_noise outside [0, 1]");
  if (pop.heterogeneity < 0.0 || pop.heterogeneity > 1.0)
    invalid("population.heterogeneity outside [0, 1]");
  if (pop.clusters < 1) invalid("population.clusters must be >= 1");
  if (pop.control_samples < 1) invalid("population.control_samples must be >= 1");

  if (signal_round < 1) invalid("task.rounds must be >= 1");
  if (task.rounds_max != signal_round + 1)
    invalid("rounds_max must leave exactly one evaluation round");
  try {
    task.validate();
  } catch (const Error& e) {
    invalid(std::string("task config: ") + e.what());
  }
  if (pop.participants < task.k_min_subgroup)
    invalid("population smaller than the minimum subgroup");
  for (std::size_t s : expected_subgroup_sizes()) {
    if (task.shamir_threshold > s) invalid("shamir threshold exceeds a subgroup size");
    if (2ull * task.shamir_threshold <= s) invalid("shamir threshold at most half a subgroup");
  }

  if (task.model_kind != pop.kind) invalid("task model kind must match the population");
  if (task.metric == audit::MetricKind::accuracy && pop.kind != fl::ModelKind::logistic_regression)
    invalid("accuracy metric needs logistic regression");
  if (task.metric == audit::MetricKind::inverse_mse && pop.kind != fl::ModelKind::linear_regression)
    invalid("inverse_mse metric needs linear regression");

  if (economics.stake_value < 1) invalid("economics.stake_value must be positive");
  if (!economics.tax_rate.at_most_one()) invalid("economics.tax_rate outside [0, 1]");
  if (!economics.slash_fraction.valid() || economics.slash_fraction.num < 0)
    invalid("economics.slash_fraction must be nonnegative");
  if (economics.initial_balance < economics.tax_rate.mul_floor(economics.stake_value))
    invalid("initial balance cannot cover the first stake tax");
  if (economics.evaluators < evaluators_needed())
    invalid("economics.evaluators below the " + std::to_string(evaluators_needed()) +
            " the task requires");

  std::uint32_t n = pop.participants;
  auto is_participant = [&](AgentId a) { return a >= 1 && a <= n; };
  auto is_evaluator = [&](AgentId a) {
    return a > n && a <= n + economics.evaluators;
  };

  for (const auto& [agent, strategy] : adversary.participants) {
    if (!is_participant(agent)) invalid("adversary participant outside the roster");
    if (strategy == adv::ParticipantStrategy::colluding_share &&
        !adversary.colluders.count(agent))
      invalid("colluding_share participant needs a colluders entry");
  }
  for (const auto& [copier, source] : adversary.colluders) {
    if (adversary.participant_strategy(copier) != adv::ParticipantStrategy::colluding_share)
      invalid("colluders entry for a non-colluding participant");
    if (!is_participant(source)) invalid("collusion source outside the roster");
    if (source == copier) invalid("participant cannot collude with itself");
    if (adversary.participant_strategy(source) != adv::ParticipantStrategy::honest)
      invalid("collusion source must train honestly");
  }
  for (const auto& [agent, plan] : adversary.evaluators) {
    if (!is_evaluator(agent)) invalid("adversary evaluator outside the evaluator pool");
    for (AgentId t : plan.targets)
      if (!is_participant(t)) invalid("extreme_scores target outside the roster");
  }
  for (const auto& [round, agents] : adversary.dropout_schedule) {
    if (round < 1 || round > signal_round + 1) invalid("dropout round outside the run");
    for (AgentId a : agents)
      if (!is_participant(a)) invalid("dropout agent outside the roster");
  }

  if (tag == ThreatTag::within_threat_model) {
    if (2 * adversary.malicious_participant_count() >= n)
      invalid("within_threat_model requires malicious participants < N/2");
    if (2 * adversary.malicious_evaluator_count() >= economics.evaluators)
      invalid("within_threat_model requires malicious evaluators < Q/2");
  }

  for (const auto& [a, b] : blocked_links) {
    if (a == b) invalid("reachability block of an agent against itself");
    if (a >= agent_count() || b >= agent_count()) invalid("reachability block outside agents");
  }
  for (AgentId a : control_leak)
    if (!is_participant(a)) invalid("control_leak agent outside the roster");
}

static Ratio parse_ratio(const json& j, Ratio fallback) {
  if (j.is_null()) return fallback;
  return Ratio{j.at("num").get<std::int64_t>(), j.at("den").get<std::int64_t>()};
}

static json ratio_json(const Ratio& r) { return json{{"den", r.den}, {"num", r.num}}; }

Scenario Scenario::from_json(const json& j) {
  Scenario s;
  s.name = j.at("name").get<std::string>();
  s.tag = threat_tag_from(j.value("tag", std::string("within_threat_model")));
  s.seed = j.at("seed").get<std::uint64_t>();

  const json& pop = j.at("population");
  s.population.participants = pop.at("participants").get<std::uint32_t>();
  s.population.samples_per_participant = pop.at("samples_per_participant").get<std::uint32_t>();
  s.population.feature_dim = pop.at("feature_dim").get<std::uint32_t>();
  s.population.label_noise = pop.value("label_noise", 0.0);
  s.population.heterogeneity = pop.value("heterogeneity", 0.0);
  s.population.clusters = pop.value("clusters", 1u);
  s.population.cluster_shift = pop.value("cluster_shift", 2.0);
  s.population.control_samples = pop.at("control_samples").get<std::uint32_t>();
  s.population.kind = fl::model_kind_from_name(pop.value("model", std::string("linear_regression")));

  const json& task = j.at("task");
  s.signal_round = task.at("rounds").get<std::uint32_t>();
  s.task.task_id = task.value("task_id", 1u);
  s.task.rounds_max = s.signal_round + 1;
  s.task.k_min_subgroup = task.at("k_min_subgroup").get<std::uint32_t>();
  s.task.evaluator_ratio = parse_ratio(task.value("evaluator_ratio", json()), Ratio{1, 10});
  s.task.reward_pool = task.at("reward_pool").get<econ::Amount>();
  s.task.fee_split_participants =
      parse_ratio(task.value("fee_split_participants", json()), Ratio{97, 100});
  s.task.acceptable_bound = score_from_double(task.value("acceptable_bound", 0.0));
  s.task.shamir_threshold = task.at("shamir_threshold").get<std::uint32_t>();
  s.task.model_kind = s.population.kind;
  s.task.metric = audit::metric_kind_from_name(task.value(
      "metric", s.population.kind == fl::ModelKind::logistic_regression
                    ? std::string("accuracy")
                    : std::string("inverse_mse")));

  if (j.contains("training")) {
    const json& tr = j.at("training");
    s.training.epochs = tr.value("epochs", 1u);
    s.training.learning_rate = tr.value("learning_rate", 0.05);
    s.training.verify_subgroup_mean = tr.value("verify_subgroup_mean", true);
  }

  const json& eco = j.at("economics");
  s.economics.initial_balance = eco.at("initial_balance").get<econ::Amount>();
  s.economics.stake_value = eco.at("stake_value").get<econ::Amount>();
  s.economics.tax_rate = parse_ratio(eco.value("tax_rate", json()), Ratio{0, 1});
  s.economics.evaluators = eco.at("evaluators").get<std::uint32_t>();
  s.economics.slash_fraction = parse_ratio(eco.value("slash_fraction", json()), Ratio{1, 2});

  if (j.contains("adversary")) {
    const json& adv_j = j.at("adversary");
    const json adv_parts = adv_j.value("participants", json::object());
    for (const auto& [key, value] : adv_parts.items())
      s.adversary.participants[static_cast<AgentId>(std::stoul(key))] =
          adv::participant_strategy_from(value.get<std::string>());
    const json adv_evals = adv_j.value("evaluators", json::object());
    for (const auto& [key, value] : adv_evals.items()) {
      adv::EvaluatorPlan plan;
      if (value.is_string()) {
        plan.strategy = adv::evaluator_strategy_from(value.get<std::string>());
      } else {
        plan.strategy = adv::evaluator_strategy_from(value.at("strategy").get<std::string>());
        for (const auto& t : value.value("targets", json::array()))
          plan.targets.insert(t.get<AgentId>());
      }
      s.adversary.evaluators[static_cast<AgentId>(std::stoul(key))] = plan;
    }
    const json adv_colluders = adv_j.value("colluders", json::object());
    for (const auto& [key, value] : adv_colluders.items())
      s.adversary.colluders[static_cast<AgentId>(std::stoul(key))] = value.get<AgentId>();
    const json adv_dropouts = adv_j.value("dropouts", json::object());
    for (const auto& [key, value] : adv_dropouts.items()) {
      auto& round = s.adversary.dropout_schedule[static_cast<std::uint32_t>(std::stoul(key))];
      for (const auto& a : value) round.insert(a.get<AgentId>());
    }
  }

  if (j.contains("reachability"))
    for (const auto& pair : j.at("reachability").value("blocked", json::array()))
      s.blocked_links.emplace_back(pair.at(0).get<AgentId>(), pair.at(1).get<AgentId>());

  s.attestation_enforcement = j.value("attestation_enforcement", true);
  for (const auto& a : j.value("control_leak", json::array()))
    s.control_leak.insert(a.get<AgentId>());

  return s;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::NotFound, "cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::ScenarioInvalid, path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::ScenarioInvalid, path + ": " + e.what());
  }
}

json Scenario::to_json() const {
  json adv_participants = json::object();
  for (const auto& [agent, strategy] : adversary.participants)
    adv_participants[std::to_string(agent)] = adv::participant_strategy_name(strategy);
  json adv_evaluators = json::object();
  for (const auto& [agent, plan] : adversary.evaluators) {
    json targets = json::array();
    for (AgentId t : plan.targets) targets.push_back(t);
    adv_evaluators[std::to_string(agent)] =
        json{{"strategy", adv::evaluator_strategy_name(plan.strategy)}, {"targets", targets}};
  }
  json colluders = json::object();
  for (const auto& [copier, source] : adversary.colluders)
    colluders[std::to_string(copier)] = source;
  json dropouts = json::object();
  for (const auto& [round, agents] : adversary.dropout_schedule)
    dropouts[std::to_string(round)] = agents;
  json blocked = json::array();
  for (const auto& [a, b] : blocked_links) blocked.push_back(json::array({a, b}));

  return json{
      {"name", name},
      {"tag", threat_tag_name(tag)},
      {"seed", seed},
      {"population",
       json{{"participants", population.participants},
            {"samples_per_participant", population.samples_per_participant},
            {"feature_dim", population.feature_dim},
            {"label_noise", population.label_noise},
            {"heterogeneity", population.heterogeneity},
            {"clusters", population.clusters},
            {"cluster_shift", population.cluster_shift},
            {"control_samples", population.control_samples},
            {"model", fl::model_kind_name(population.kind)}}},
      {"task",
       json{{"rounds", signal_round},
            {"task_id", task.task_id},
            {"k_min_subgroup", task.k_min_subgroup},
            {"evaluator_ratio", ratio_json(task.evaluator_ratio)},
            {"reward_pool", task.reward_pool},
            {"fee_split_participants", ratio_json(task.fee_split_participants)},
            {"acceptable_bound", score_to_double(task.acceptable_bound)},
            {"shamir_threshold", task.shamir_threshold},
            {"metric", audit::metric_kind_name(task.metric)}}},
      {"training",
       json{{"epochs", training.epochs},
            {"learning_rate", training.learning_rate},
            {"verify_subgroup_mean", training.verify_subgroup_mean}}},
      {"economics",
       json{{"initial_balance", economics.initial_balance},
            {"stake_value", economics.stake_value},
            {"tax_rate", ratio_json(economics.tax_rate)},
            {"evaluators", economics.evaluators},
            {"slash_fraction", ratio_json(economics.slash_fraction)}}},
      {"adversary",
       json{{"participants", adv_participants},
            {"evaluators", adv_evaluators},
            {"colluders", colluders},
            {"dropouts", dropouts}}},
      {"reachability", json{{"blocked", blocked}}},
      {"attestation_enforcement", attestation_enforcement},
      {"control_leak", control_leak}};
}

}  // namespace scen
}  // namespace din
