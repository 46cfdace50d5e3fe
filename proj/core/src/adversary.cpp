#include "din/adversary.hpp"

namespace din {
namespace adv {

const char* participant_strategy_name(ParticipantStrategy s) {
  switch (s) {
    case ParticipantStrategy::honest: return "honest";
    case ParticipantStrategy::random_weights: return "random_weights";
    case ParticipantStrategy::inverted_labels: return "inverted_labels";
    case ParticipantStrategy::colluding_share: return "colluding_share";
  }
  return "?";
}

const char* evaluator_strategy_name(EvaluatorStrategy s) {
  switch (s) {
    case EvaluatorStrategy::honest: return "honest";
    case EvaluatorStrategy::extreme_scores: return "extreme_scores";
    case EvaluatorStrategy::copycat: return "copycat";
    case EvaluatorStrategy::false_attestation: return "false_attestation";
  }
  return "?";
}

ParticipantStrategy participant_strategy_from(const std::string& name) {
  if (name == "honest") return ParticipantStrategy::honest;
  if (name == "random_weights") return ParticipantStrategy::random_weights;
  if (name == "inverted_labels") return ParticipantStrategy::inverted_labels;
  if (name == "colluding_share") return ParticipantStrategy::colluding_share;
  fail(ErrorCode::UnknownStrategy, name);
}

EvaluatorStrategy evaluator_strategy_from(const std::string& name) {
  if (name == "honest") return EvaluatorStrategy::honest;
  if (name == "extreme_scores") return EvaluatorStrategy::extreme_scores;
  if (name == "copycat") return EvaluatorStrategy::copycat;
  if (name == "false_attestation") return EvaluatorStrategy::false_attestation;
  fail(ErrorCode::UnknownStrategy, name);
}

ParticipantStrategy AdversaryConfig::participant_strategy(AgentId agent) const {
  auto it = participants.find(agent);
  return it == participants.end() ? ParticipantStrategy::honest : it->second;
}

EvaluatorPlan AdversaryConfig::evaluator_plan(AgentId agent) const {
  auto it = evaluators.find(agent);
  return it == evaluators.end() ? EvaluatorPlan{} : it->second;
}

std::set<AgentId> AdversaryConfig::dropouts(std::uint32_t round) const {
  auto it = dropout_schedule.find(round);
  return it == dropout_schedule.end() ? std::set<AgentId>{} : it->second;
}

std::size_t AdversaryConfig::malicious_participant_count() const {
  std::size_t count = 0;
  for (const auto& [agent, strategy] : participants) {
    (void)agent;
    if (strategy != ParticipantStrategy::honest &&
        strategy != ParticipantStrategy::colluding_share)
      ++count;
  }
  return count;
}

std::size_t AdversaryConfig::malicious_evaluator_count() const {
  std::size_t count = 0;
  for (const auto& [agent, plan] : evaluators) {
    (void)agent;
    if (plan.strategy != EvaluatorStrategy::honest) ++count;
  }
  return count;
}

fl::PrivateDataset invert_labels(fl::PrivateDataset data, fl::ModelKind kind) {
  for (double& y : data.labels)
    y = kind == fl::ModelKind::logistic_regression ? 1.0 - y : -y;
  return data;
}

fl::ModelParams malicious_update(ParticipantStrategy strategy, const fl::ModelParams& global,
                                 const fl::ModelParams& honest_update,
                                 const fl::PrivateDataset& data, const TrainOptions& opts,
                                 double clamp_range, Rng rng) {
  switch (strategy) {
    case ParticipantStrategy::honest:
    case ParticipantStrategy::colluding_share:
      return honest_update;
    case ParticipantStrategy::random_weights: {
      fl::ModelParams noise = honest_update;
      for (double& w : noise.weights) w = rng.uniform_double(-clamp_range, clamp_range);
      return noise;
    }
    case ParticipantStrategy::inverted_labels:
      return fl::local_train(global, invert_labels(data, global.kind), opts.epochs,
                             opts.learning_rate);
  }
  fail(ErrorCode::UnknownStrategy, "participant strategy");
}

ScoreMicro reported_score(const EvaluatorPlan& plan, AgentId participant, ScoreMicro truthful) {
  switch (plan.strategy) {
    case EvaluatorStrategy::honest:
    case EvaluatorStrategy::copycat:
      return truthful;
    case EvaluatorStrategy::extreme_scores:
      return plan.targets.count(participant) ? kScoreOne : 0;
    case EvaluatorStrategy::false_attestation: {
      ScoreMicro lie = kScoreOne - truthful;
      if (lie == truthful) ++lie;
      return lie;
    }
  }
  fail(ErrorCode::UnknownStrategy, "evaluator strategy");
}

audit::Attestation tampered_attestation(audit::Attestation att, ScoreMicro claimed) {
  att.claimed_score = claimed;
  return att;
}

}  // namespace adv
}  // namespace din
