#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "din/common.hpp"
#include "din/economics.hpp"

namespace din {
namespace metrics {

struct RoundMetrics {
  std::uint32_t round = 0;
  double training_loss = 0.0;  // pooled training loss under the round's global model
  double control_score = 0.0;  // task metric on the withheld control set
  std::uint32_t updates_registered = 0;
  std::uint32_t admitted = 0;
  std::uint32_t aborted_subgroups = 0;
  std::uint32_t disputes = 0;
  econ::Amount tax_collected = 0;
};

struct AgentOutcome {
  AgentId agent = 0;
  std::string role;      // owner | participant | evaluator
  std::string strategy;  // honest unless the scenario says otherwise
  bool scored = false;   // took part in settlement scoring
  ScoreMicro overall = 0;
  ScoreMicro raw_overall = 0;
  bool eliminated = false;
  std::uint32_t accepted_reports = 0;
  econ::Amount payout = 0;
  econ::Amount final_balance = 0;
  bool slash_flagged = false;
  bool abstained = false;
  econ::Amount slashed_amount = 0;
};

struct TreasuryRow {
  std::uint32_t epoch = 0;
  econ::Amount public_goods = 0;
  econ::Amount total_balances = 0;
  econ::Amount escrow = 0;
  std::uint32_t active_stakes = 0;
};

struct RunMetrics {
  std::string scenario_name;
  std::uint64_t seed = 0;
  std::uint32_t participants = 0;
  std::uint32_t evaluators = 0;
  std::uint32_t rounds_completed = 0;  // includes the evaluation round
  std::vector<RoundMetrics> rounds;
  std::vector<AgentOutcome> agents;
  std::vector<TreasuryRow> treasury;

  econ::Amount reward_pool = 0;
  econ::Amount paid_participants = 0;
  econ::Amount paid_evaluators = 0;
  econ::Amount public_goods_remainder = 0;

  std::uint32_t reveal_mismatches = 0;
  std::uint32_t missing_attestations = 0;
  std::uint32_t voided_subgroups = 0;
  std::uint32_t slashed_evaluators = 0;

  std::string final_model;  // content id, revealed at settlement
  std::string final_state_digest;
  bool conserved = false;
  std::int64_t wall_clock_ms = 0;

  const AgentOutcome* outcome(AgentId agent) const;

  nlohmann::json to_json() const;
  static RunMetrics from_json(const nlohmann::json& j);
  static RunMetrics from_file(const std::string& path);
};

// Comma-separated tables: round_metrics.csv, agents.csv, treasury.csv.
void write_csv_tables(const RunMetrics& run, const std::string& dir);
// Everything in one machine-readable file; the compare input format.
void write_summary(const RunMetrics& run, const std::string& path);

struct ParticipantDelta {
  AgentId agent = 0;
  std::string strategy;
  econ::Amount payout_a = 0;
  econ::Amount payout_b = 0;
  ScoreMicro overall_a = 0;
  ScoreMicro overall_b = 0;
};

struct CompareReport {
  std::string name_a;
  std::string name_b;
  std::uint64_t seed = 0;
  std::vector<ParticipantDelta> participants;
  double mean_abs_score_diff = 0.0;  // fractional score units
  double max_abs_score_diff = 0.0;
  double payout_share_l1 = 0.0;  // distance between participant payout distributions
  std::vector<double> loss_delta;  // per common training round, b - a

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Requires the same population: equal seed and participant count.
CompareReport compare(const RunMetrics& a, const RunMetrics& b);

}  // namespace metrics
}  // namespace din
