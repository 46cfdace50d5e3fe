#include "din/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace din {
namespace metrics {

using nlohmann::json;

const AgentOutcome* RunMetrics::outcome(AgentId agent) const {
  for (const auto& a : agents)
    if (a.agent == agent) return &a;
  return nullptr;
}

json RunMetrics::to_json() const {
  json rounds_j = json::array();
  for (const auto& r : rounds)
    rounds_j.push_back(json{{"round", r.round},
                            {"training_loss", r.training_loss},
                            {"control_score", r.control_score},
                            {"updates_registered", r.updates_registered},
                            {"admitted", r.admitted},
                            {"aborted_subgroups", r.aborted_subgroups},
                            {"disputes", r.disputes},
                            {"tax_collected", r.tax_collected}});
  json agents_j = json::array();
  for (const auto& a : agents)
    agents_j.push_back(json{{"agent", a.agent},
                            {"role", a.role},
                            {"strategy", a.strategy},
                            {"scored", a.scored},
                            {"overall", a.overall},
                            {"raw_overall", a.raw_overall},
                            {"eliminated", a.eliminated},
                            {"accepted_reports", a.accepted_reports},
                            {"payout", a.payout},
                            {"final_balance", a.final_balance},
                            {"slash_flagged", a.slash_flagged},
                            {"abstained", a.abstained},
                            {"slashed_amount", a.slashed_amount}});
  json treasury_j = json::array();
  for (const auto& t : treasury)
    treasury_j.push_back(json{{"epoch", t.epoch},
                              {"public_goods", t.public_goods},
                              {"total_balances", t.total_balances},
                              {"escrow", t.escrow},
                              {"active_stakes", t.active_stakes}});
  return json{{"scenario_name", scenario_name},
              {"seed", seed},
              {"participants", participants},
              {"evaluators", evaluators},
              {"rounds_completed", rounds_completed},
              {"rounds", rounds_j},
              {"agents", agents_j},
              {"treasury", treasury_j},
              {"reward_pool", reward_pool},
              {"paid_participants", paid_participants},
              {"paid_evaluators", paid_evaluators},
              {"public_goods_remainder", public_goods_remainder},
              {"reveal_mismatches", reveal_mismatches},
              {"missing_attestations", missing_attestations},
              {"voided_subgroups", voided_subgroups},
              {"slashed_evaluators", slashed_evaluators},
              {"final_model", final_model},
              {"final_state_digest", final_state_digest},
              {"conserved", conserved},
              {"wall_clock_ms", wall_clock_ms}};
}

RunMetrics RunMetrics::from_json(const json& j) {
  RunMetrics m;
  m.scenario_name = j.at("scenario_name").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.participants = j.at("participants").get<std::uint32_t>();
  m.evaluators = j.at("evaluators").get<std::uint32_t>();
  m.rounds_completed = j.at("rounds_completed").get<std::uint32_t>();
  for (const auto& r : j.at("rounds")) {
    RoundMetrics row;
    row.round = r.at("round").get<std::uint32_t>();
    row.training_loss = r.at("training_loss").get<double>();
    row.control_score = r.at("control_score").get<double>();
    row.updates_registered = r.at("updates_registered").get<std::uint32_t>();
    row.admitted = r.at("admitted").get<std::uint32_t>();
    row.aborted_subgroups = r.at("aborted_subgroups").get<std::uint32_t>();
    row.disputes = r.at("disputes").get<std::uint32_t>();
    row.tax_collected = r.at("tax_collected").get<econ::Amount>();
    m.rounds.push_back(row);
  }
  for (const auto& a : j.at("agents")) {
    AgentOutcome row;
    row.agent = a.at("agent").get<AgentId>();
    row.role = a.at("role").get<std::string>();
    row.strategy = a.at("strategy").get<std::string>();
    row.scored = a.at("scored").get<bool>();
    row.overall = a.at("overall").get<ScoreMicro>();
    row.raw_overall = a.at("raw_overall").get<ScoreMicro>();
    row.eliminated = a.at("eliminated").get<bool>();
    row.accepted_reports = a.at("accepted_reports").get<std::uint32_t>();
    row.payout = a.at("payout").get<econ::Amount>();
    row.final_balance = a.at("final_balance").get<econ::Amount>();
    row.slash_flagged = a.at("slash_flagged").get<bool>();
    row.abstained = a.at("abstained").get<bool>();
    row.slashed_amount = a.at("slashed_amount").get<econ::Amount>();
    m.agents.push_back(row);
  }
  for (const auto& t : j.at("treasury")) {
    TreasuryRow row;
    row.epoch = t.at("epoch").get<std::uint32_t>();
    row.public_goods = t.at("public_goods").get<econ::Amount>();
    row.total_balances = t.at("total_balances").get<econ::Amount>();
    row.escrow = t.at("escrow").get<econ::Amount>();
    row.active_stakes = t.at("active_stakes").get<std::uint32_t>();
    m.treasury.push_back(row);
  }
  m.reward_pool = j.at("reward_pool").get<econ::Amount>();
  m.paid_participants = j.at("paid_participants").get<econ::Amount>();
  m.paid_evaluators = j.at("paid_evaluators").get<econ::Amount>();
  m.public_goods_remainder = j.at("public_goods_remainder").get<econ::Amount>();
  m.reveal_mismatches = j.at("reveal_mismatches").get<std::uint32_t>();
  m.missing_attestations = j.at("missing_attestations").get<std::uint32_t>();
  m.voided_subgroups = j.at("voided_subgroups").get<std::uint32_t>();
  m.slashed_evaluators = j.at("slashed_evaluators").get<std::uint32_t>();
  m.final_model = j.at("final_model").get<std::string>();
  m.final_state_digest = j.at("final_state_digest").get<std::string>();
  m.conserved = j.at("conserved").get<bool>();
  m.wall_clock_ms = j.at("wall_clock_ms").get<std::int64_t>();
  return m;
}

RunMetrics RunMetrics::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::NotFound, "cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::IncompatibleRuns, path + ": " + e.what());
  }
  return from_json(j);
}

static std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::NotFound, "cannot write " + path);
  return out;
}

void write_csv_tables(const RunMetrics& run, const std::string& dir) {
  {
    auto out = open_out(dir + "/round_metrics.csv");
    out << "round,training_loss,control_score,updates_registered,admitted,"
           "aborted_subgroups,disputes,tax_collected\n";
    for (const auto& r : run.rounds)
      out << r.round << ',' << r.training_loss << ',' << r.control_score << ','
          << r.updates_registered << ',' << r.admitted << ',' << r.aborted_subgroups << ','
          << r.disputes << ',' << r.tax_collected << '\n';
  }
  {
    auto out = open_out(dir + "/agents.csv");
    out << "agent,role,strategy,scored,overall,raw_overall,eliminated,accepted_reports,"
           "payout,final_balance,slash_flagged,abstained,slashed_amount\n";
    for (const auto& a : run.agents)
      out << a.agent << ',' << a.role << ',' << a.strategy << ',' << a.scored << ','
          << a.overall << ',' << a.raw_overall << ',' << a.eliminated << ','
          << a.accepted_reports << ',' << a.payout << ',' << a.final_balance << ','
          << a.slash_flagged << ',' << a.abstained << ',' << a.slashed_amount << '\n';
  }
  {
    auto out = open_out(dir + "/treasury.csv");
    out << "epoch,public_goods,total_balances,escrow,active_stakes\n";
    for (const auto& t : run.treasury)
      out << t.epoch << ',' << t.public_goods << ',' << t.total_balances << ',' << t.escrow
          << ',' << t.active_stakes << '\n';
  }
}

void write_summary(const RunMetrics& run, const std::string& path) {
  auto out = open_out(path);
  out << run.to_json().dump(2) << '\n';
}

json CompareReport::to_json() const {
  json rows = json::array();
  for (const auto& p : participants)
    rows.push_back(json{{"agent", p.agent},
                        {"strategy", p.strategy},
                        {"payout_a", p.payout_a},
                        {"payout_b", p.payout_b},
                        {"payout_delta", p.payout_b - p.payout_a},
                        {"overall_a", p.overall_a},
                        {"overall_b", p.overall_b},
                        {"abs_score_diff", std::abs(p.overall_b - p.overall_a)}});
  return json{{"run_a", name_a},
              {"run_b", name_b},
              {"seed", seed},
              {"participants", rows},
              {"mean_abs_score_diff", mean_abs_score_diff},
              {"max_abs_score_diff", max_abs_score_diff},
              {"payout_share_l1", payout_share_l1},
              {"loss_delta", loss_delta}};
}

std::string CompareReport::to_table() const {
  std::ostringstream out;
  out << "runs: " << name_a << " vs " << name_b << " (seed " << seed << ")\n";
  out << "agent  strategy          payout_a   payout_b      delta  score_a  score_b  |diff|\n";
  for (const auto& p : participants) {
    char line[160];
    std::snprintf(line, sizeof(line), "%5u  %-16s %9lld  %9lld  %9lld  %7.4f  %7.4f  %6.4f\n",
                  p.agent, p.strategy.c_str(), static_cast<long long>(p.payout_a),
                  static_cast<long long>(p.payout_b),
                  static_cast<long long>(p.payout_b - p.payout_a),
                  score_to_double(p.overall_a), score_to_double(p.overall_b),
                  std::abs(score_to_double(p.overall_b) - score_to_double(p.overall_a)));
    out << line;
  }
  char tail[200];
  std::snprintf(tail, sizeof(tail),
                "mean |score diff| %.6f   max |score diff| %.6f   payout share L1 %.6f\n",
                mean_abs_score_diff, max_abs_score_diff, payout_share_l1);
  out << tail;
  return out.str();
}

CompareReport compare(const RunMetrics& a, const RunMetrics& b) {
  if (a.seed != b.seed)
    fail(ErrorCode::IncompatibleRuns, "runs use different seeds");
  if (a.participants != b.participants)
    fail(ErrorCode::IncompatibleRuns, "runs use different populations");

  CompareReport report;
  report.name_a = a.scenario_name;
  report.name_b = b.scenario_name;
  report.seed = a.seed;

  econ::Amount total_a = 0;
  econ::Amount total_b = 0;
  for (const auto& row : a.agents)
    if (row.role == "participant") total_a += row.payout;
  for (const auto& row : b.agents)
    if (row.role == "participant") total_b += row.payout;

  double sum_diff = 0.0;
  double max_diff = 0.0;
  double share_l1 = 0.0;
  for (const auto& row : a.agents) {
    if (row.role != "participant") continue;
    const AgentOutcome* other = b.outcome(row.agent);
    if (!other || other->role != "participant")
      fail(ErrorCode::IncompatibleRuns, "participant sets differ");
    ParticipantDelta d;
    d.agent = row.agent;
    d.strategy = row.strategy;
    d.payout_a = row.payout;
    d.payout_b = other->payout;
    d.overall_a = row.overall;
    d.overall_b = other->overall;
    report.participants.push_back(d);

    double diff = std::abs(score_to_double(d.overall_b) - score_to_double(d.overall_a));
    sum_diff += diff;
    max_diff = std::max(max_diff, diff);
    double share_a = total_a > 0 ? static_cast<double>(d.payout_a) / total_a : 0.0;
    double share_b = total_b > 0 ? static_cast<double>(d.payout_b) / total_b : 0.0;
    share_l1 += std::abs(share_b - share_a);
  }
  if (!report.participants.empty())
    report.mean_abs_score_diff = sum_diff / report.participants.size();
  report.max_abs_score_diff = max_diff;
  report.payout_share_l1 = share_l1;

  std::size_t common = std::min(a.rounds.size(), b.rounds.size());
  for (std::size_t i = 0; i < common; ++i)
    report.loss_delta.push_back(b.rounds[i].training_loss - a.rounds[i].training_loss);
  return report;
}

}  // namespace metrics
}  // namespace din
