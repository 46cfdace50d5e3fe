#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "din/common.hpp"
#include "din/content_store.hpp"
#include "din/fl_core.hpp"

namespace din {
namespace audit {

enum class MetricKind : std::uint8_t {
  accuracy = 1,     // classification hit rate, logistic models
  inverse_mse = 2,  // 1 / (1 + mse), regression models
};

const char* metric_kind_name(MetricKind kind);
MetricKind metric_kind_from_name(const std::string& name);

// Proof-of-evaluation stand-in. The environment issues a nonce for every
// benchmark it runs; an attestation verifies only if the nonce is on the
// registry and every claimed field matches what was actually computed.
struct Attestation {
  AgentId evaluator = 0;
  AgentId participant = 0;
  Digest256 control_digest;
  MetricKind metric = MetricKind::accuracy;
  ScoreMicro claimed_score = 0;
  Digest256 env_nonce;
};

// The evaluation boundary. Holds the control dataset privately; agent
// code gets scores and attestations out, never rows. Stands in for the
// trusted-execution / MPC machinery that evaluates concealed models.
class SecureEnvironment {
 public:
  SecureEnvironment(fl::ControlDataset control, FixedPointCodec codec,
                    const ContentStore* store, std::uint64_t secret);

  const Digest256& control_digest() const { return control_digest_; }

  void set_assignments(std::map<AgentId, std::vector<AgentId>> evaluator_to_participants);

  // Participant hands its evaluation-round model in by content id. The
  // blob must be present in the store and parse as a model.
  void deliver_model(AgentId participant, const ContentId& cid);

  bool delivered(AgentId participant) const { return models_.count(participant) != 0; }

  // Run the benchmark for one assigned participant. Returns a truthful
  // attestation; what the evaluator then claims on-chain is its own
  // business.
  Attestation benchmark(AgentId evaluator, AgentId participant, MetricKind metric);

  bool verify(const Attestation& att) const;

  // score leaked to nobody: evaluation of arbitrary models for metrics /
  // oracles (not attested, simulator-internal)
  ScoreMicro raw_score(const fl::ModelParams& model, MetricKind metric) const;

 private:
  fl::ControlDataset control_;  // never exposed
  FixedPointCodec codec_;
  const ContentStore* store_;
  std::uint64_t secret_;
  Digest256 control_digest_;
  std::map<AgentId, std::vector<AgentId>> assignments_;
  std::map<AgentId, fl::ModelParams> models_;
  std::map<Digest256, Attestation> issued_;
};

// ---- scoring rules ----
// Scores are micro-units; medians are kept doubled (sum of the two
// middle order statistics) so every comparison is integer-exact.

using Median2 = std::int64_t;

Median2 median2(std::vector<ScoreMicro> scores);  // scores nonempty

inline constexpr ScoreMicro kAPrioriScore = kScoreOne / 2;

// Participant overall score: the accepted score furthest from the
// median, ties broken toward the lower score. No accepted reports means
// the a-priori 0.5.
ScoreMicro participant_overall_score(const std::vector<ScoreMicro>& accepted);

// Evaluator credit for one accepted report against the participant's
// median: zero beyond distance 0.5, else 1 - distance. Returned doubled
// (2'000'000 == credit 1.0).
std::int64_t report_credit2(ScoreMicro score, Median2 med2);

// Mean credit in micro-units, floored; zero when nothing was accepted.
ScoreMicro evaluator_score(const std::vector<std::int64_t>& credits2);

// Scores below the acceptable bound are zeroed (eliminated).
ScoreMicro apply_bound_filter(ScoreMicro overall, ScoreMicro acceptable_bound);

// ---- reward fractions ----

// Exact rational with 128-bit terms; wide enough for any desk-scale
// split this simulator produces.
struct Frac {
  __int128 num = 0;
  __int128 den = 1;

  static Frac of(std::int64_t n, std::int64_t d);
  Frac plus(const Frac& other) const;
  bool equals(std::int64_t n, std::int64_t d) const;
  double as_double() const;
};

struct RewardSplit {
  std::map<AgentId, Frac> participant_fraction;
  std::map<AgentId, Frac> evaluator_fraction;
  Frac public_goods;  // remainder share; whole participant pool when all scores are zero
};

// Fraction of the task pool owed to each payee: participants share
// fee_split pro-rata by score, evaluators the complement pro-rata by
// evaluator score. Fractions sum to exactly 1.
RewardSplit reward_fractions(const std::map<AgentId, ScoreMicro>& participant_scores,
                             const std::map<AgentId, ScoreMicro>& evaluator_scores,
                             const Ratio& fee_split_participants);

// ---- contribution oracle ----

// Exact Shapley values by full coalition enumeration (n <= 12). The
// characteristic function maps a membership bitmask to an integer value
// (micro-unit scores in practice). Results are exact rationals over n!.
struct ShapleyResult {
  std::vector<std::int64_t> numerator;  // per player
  std::int64_t denominator = 1;         // n!

  double value(std::size_t i) const {
    return static_cast<double>(numerator[i]) / static_cast<double>(denominator);
  }
};

ShapleyResult shapley_exact(std::uint32_t n,
                            const std::function<std::int64_t(std::uint32_t)>& value_of);

}  // namespace audit
}  // namespace din
