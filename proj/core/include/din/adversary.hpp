#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "din/auditing.hpp"
#include "din/codec.hpp"
#include "din/common.hpp"
#include "din/fl_core.hpp"
#include "din/rng.hpp"

namespace din {
namespace adv {

enum class ParticipantStrategy : std::uint8_t {
  honest = 0,
  random_weights,    // submits noise instead of a trained model
  inverted_labels,   // trains on label-flipped data
  colluding_share,   // submits a copy of another participant's honest model
};

enum class EvaluatorStrategy : std::uint8_t {
  honest = 0,
  extreme_scores,     // 1.0 for a target set, 0.0 for everyone else
  copycat,            // tries to reuse a peer's revealed score
  false_attestation,  // reports a score its attestation does not back
};

const char* participant_strategy_name(ParticipantStrategy s);
const char* evaluator_strategy_name(EvaluatorStrategy s);
ParticipantStrategy participant_strategy_from(const std::string& name);
EvaluatorStrategy evaluator_strategy_from(const std::string& name);

struct EvaluatorPlan {
  EvaluatorStrategy strategy = EvaluatorStrategy::honest;
  std::set<AgentId> targets;  // extreme_scores only
};

struct AdversaryConfig {
  std::map<AgentId, ParticipantStrategy> participants;
  std::map<AgentId, EvaluatorPlan> evaluators;
  std::map<AgentId, AgentId> colluders;                     // copier -> model source
  std::map<std::uint32_t, std::set<AgentId>> dropout_schedule;  // round -> offline agents

  ParticipantStrategy participant_strategy(AgentId agent) const;
  EvaluatorPlan evaluator_plan(AgentId agent) const;
  std::set<AgentId> dropouts(std::uint32_t round) const;

  // Identical model submissions are tolerated by the protocol, so
  // colluding_share does not count toward the misbehavior quota.
  std::size_t malicious_participant_count() const;
  std::size_t malicious_evaluator_count() const;
};

struct TrainOptions {
  std::uint32_t epochs = 1;
  double learning_rate = 0.05;
};

// Regression negates the target, classification swaps the classes.
fl::PrivateDataset invert_labels(fl::PrivateDataset data, fl::ModelKind kind);

// What the participant actually submits for the round. For
// colluding_share the caller passes the model source's honest update as
// honest_update; for inverted_labels training restarts from the global.
fl::ModelParams malicious_update(ParticipantStrategy strategy, const fl::ModelParams& global,
                                 const fl::ModelParams& honest_update,
                                 const fl::PrivateDataset& data, const TrainOptions& opts,
                                 double clamp_range, Rng rng);

// The score the evaluator claims on-chain given the truthful benchmark
// result. copycat is resolved by the caller (it needs a peer's reveal) and
// falls through to the truthful value here.
ScoreMicro reported_score(const EvaluatorPlan& plan, AgentId participant, ScoreMicro truthful);

// false_attestation support: forge the claimed score inside an otherwise
// genuine attestation, which breaks its environment verification.
audit::Attestation tampered_attestation(audit::Attestation att, ScoreMicro claimed);

}  // namespace adv
}  // namespace din
