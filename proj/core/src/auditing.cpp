#include "din/auditing.hpp"

#include <algorithm>
#include <cmath>

namespace din {
namespace audit {

const char* metric_kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::accuracy: return "accuracy";
    case MetricKind::inverse_mse: return "inverse_mse";
  }
  return "unknown";
}

MetricKind metric_kind_from_name(const std::string& name) {
  if (name == "accuracy") return MetricKind::accuracy;
  if (name == "inverse_mse") return MetricKind::inverse_mse;
  fail(ErrorCode::UnsupportedMetric, "metric '" + name + "'");
}

SecureEnvironment::SecureEnvironment(fl::ControlDataset control, FixedPointCodec codec,
                                     const ContentStore* store, std::uint64_t secret)
    : control_(std::move(control)),
      codec_(codec),
      store_(store),
      secret_(secret),
      control_digest_(control_.digest()) {}

void SecureEnvironment::set_assignments(
    std::map<AgentId, std::vector<AgentId>> evaluator_to_participants) {
  assignments_ = std::move(evaluator_to_participants);
}

void SecureEnvironment::deliver_model(AgentId participant, const ContentId& cid) {
  const auto& bytes = store_->fetch_any(cid);
  models_[participant] = fl::ModelParams::deserialize(bytes, codec_);
}

ScoreMicro SecureEnvironment::raw_score(const fl::ModelParams& model, MetricKind metric) const {
  switch (metric) {
    case MetricKind::accuracy: {
      if (model.kind != fl::ModelKind::logistic_regression)
        fail(ErrorCode::UnsupportedMetric, "accuracy needs a classifier");
      return score_from_double(fl::accuracy(model, control_.rows, control_.labels));
    }
    case MetricKind::inverse_mse: {
      if (model.kind != fl::ModelKind::linear_regression)
        fail(ErrorCode::UnsupportedMetric, "inverse_mse needs a regressor");
      double mse = fl::mean_squared_error(model, control_.rows, control_.labels);
      return score_from_double(1.0 / (1.0 + mse));
    }
  }
  fail(ErrorCode::UnsupportedMetric, "unknown metric");
}

Attestation SecureEnvironment::benchmark(AgentId evaluator, AgentId participant,
                                         MetricKind metric) {
  auto it = assignments_.find(evaluator);
  if (it == assignments_.end() ||
      std::find(it->second.begin(), it->second.end(), participant) == it->second.end())
    fail(ErrorCode::NotAssigned, "evaluator " + std::to_string(evaluator) +
                                     " not assigned participant " + std::to_string(participant));
  auto model = models_.find(participant);
  if (model == models_.end())
    fail(ErrorCode::UnknownModel, "participant " + std::to_string(participant) +
                                      " delivered no model");

  Attestation att;
  att.evaluator = evaluator;
  att.participant = participant;
  att.control_digest = control_digest_;
  att.metric = metric;
  att.claimed_score = raw_score(model->second, metric);
  att.env_nonce = DigestBuilder{}
                      .add_u64(secret_)
                      .add_u64(evaluator)
                      .add_u64(participant)
                      .add_u64(static_cast<std::uint64_t>(att.metric))
                      .add_i64(att.claimed_score)
                      .add_bytes(control_digest_.bytes.data(), control_digest_.bytes.size())
                      .finish();
  issued_[att.env_nonce] = att;
  return att;
}

bool SecureEnvironment::verify(const Attestation& att) const {
  auto it = issued_.find(att.env_nonce);
  if (it == issued_.end()) return false;
  const Attestation& real = it->second;
  return real.evaluator == att.evaluator && real.participant == att.participant &&
         real.control_digest == att.control_digest && real.metric == att.metric &&
         real.claimed_score == att.claimed_score;
}

Median2 median2(std::vector<ScoreMicro> scores) {
  if (scores.empty()) fail(ErrorCode::EmptyInput, "median of nothing");
  std::sort(scores.begin(), scores.end());
  std::size_t n = scores.size();
  if (n % 2 == 1) return 2 * scores[n / 2];
  return scores[n / 2 - 1] + scores[n / 2];
}

ScoreMicro participant_overall_score(const std::vector<ScoreMicro>& accepted) {
  if (accepted.empty()) return kAPrioriScore;
  Median2 med = median2(accepted);
  ScoreMicro chosen = accepted.front();
  std::int64_t best = -1;
  for (ScoreMicro s : accepted) {
    std::int64_t dist = std::abs(2 * s - med);
    if (dist > best || (dist == best && s < chosen)) {
      best = dist;
      chosen = s;
    }
  }
  return chosen;
}

std::int64_t report_credit2(ScoreMicro score, Median2 med2) {
  std::int64_t dist2 = std::abs(2 * score - med2);
  if (dist2 > 2 * kAPrioriScore) return 0;  // more than 0.5 away
  return 2 * kScoreOne - dist2;
}

ScoreMicro evaluator_score(const std::vector<std::int64_t>& credits2) {
  if (credits2.empty()) return 0;
  std::int64_t total = std::accumulate(credits2.begin(), credits2.end(), std::int64_t{0});
  return total / (2 * static_cast<std::int64_t>(credits2.size()));
}

ScoreMicro apply_bound_filter(ScoreMicro overall, ScoreMicro acceptable_bound) {
  return overall < acceptable_bound ? 0 : overall;
}

static __int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a == 0 ? 1 : a;
}

Frac Frac::of(std::int64_t n, std::int64_t d) {
  if (d <= 0) fail(ErrorCode::OutOfRange, "fraction denominator");
  Frac f{n, d};
  __int128 g = gcd128(f.num, f.den);
  f.num /= g;
  f.den /= g;
  return f;
}

Frac Frac::plus(const Frac& other) const {
  Frac out;
  out.num = num * other.den + other.num * den;
  out.den = den * other.den;
  __int128 g = gcd128(out.num, out.den);
  out.num /= g;
  out.den /= g;
  return out;
}

bool Frac::equals(std::int64_t n, std::int64_t d) const {
  return num * d == static_cast<__int128>(n) * den;
}

double Frac::as_double() const {
  return static_cast<double>(num) / static_cast<double>(den);
}

RewardSplit reward_fractions(const std::map<AgentId, ScoreMicro>& participant_scores,
                             const std::map<AgentId, ScoreMicro>& evaluator_scores,
                             const Ratio& fee_split_participants) {
  if (!fee_split_participants.at_most_one())
    fail(ErrorCode::InvalidConfig, "fee split must be a ratio in [0, 1]");

  RewardSplit split;
  const std::int64_t fn = fee_split_participants.num;
  const std::int64_t fd = fee_split_participants.den;

  std::int64_t wsum = 0;
  for (const auto& [agent, w] : participant_scores) wsum += w;
  std::int64_t vsum = 0;
  for (const auto& [agent, v] : evaluator_scores) vsum += v;

  Frac allocated{0, 1};
  if (wsum > 0) {
    for (const auto& [agent, w] : participant_scores) {
      Frac f;
      f.num = static_cast<__int128>(w) * fn;
      f.den = static_cast<__int128>(wsum) * fd;
      __int128 g = gcd128(f.num, f.den);
      f.num /= g;
      f.den /= g;
      split.participant_fraction[agent] = f;
      allocated = allocated.plus(f);
    }
  }
  if (vsum > 0) {
    for (const auto& [agent, v] : evaluator_scores) {
      Frac f;
      f.num = static_cast<__int128>(v) * (fd - fn);
      f.den = static_cast<__int128>(vsum) * fd;
      __int128 g = gcd128(f.num, f.den);
      f.num /= g;
      f.den /= g;
      split.evaluator_fraction[agent] = f;
      allocated = allocated.plus(f);
    }
  }
  // whatever was not allocated (zero-score pools) belongs to public goods
  Frac one{1, 1};
  split.public_goods = Frac{one.num * allocated.den - allocated.num * one.den,
                            one.den * allocated.den};
  __int128 g = gcd128(split.public_goods.num, split.public_goods.den);
  split.public_goods.num /= g;
  split.public_goods.den /= g;
  return split;
}

ShapleyResult shapley_exact(std::uint32_t n,
                            const std::function<std::int64_t(std::uint32_t)>& value_of) {
  if (n == 0) fail(ErrorCode::EmptyInput, "no players");
  if (n > 12) fail(ErrorCode::OutOfRange, "exact enumeration limited to 12 players");

  std::vector<std::int64_t> fact(n + 1, 1);
  for (std::uint32_t i = 1; i <= n; ++i)
    fact[i] = fact[i - 1] * static_cast<std::int64_t>(i);

  std::uint32_t all = (n >= 32) ? 0xffffffffu : ((1u << n) - 1);
  std::vector<std::int64_t> table(static_cast<std::size_t>(all) + 1);
  for (std::uint32_t mask = 0; mask <= all; ++mask) table[mask] = value_of(mask);

  ShapleyResult result;
  result.denominator = fact[n];
  result.numerator.assign(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint32_t bit = 1u << i;
    __int128 acc = 0;
    for (std::uint32_t mask = 0; mask <= all; ++mask) {
      if (mask & bit) continue;
      auto s = static_cast<std::uint32_t>(__builtin_popcount(mask));
      __int128 weight = static_cast<__int128>(fact[s]) * fact[n - 1 - s];
      acc += weight * (table[mask | bit] - table[mask]);
    }
    result.numerator[i] = static_cast<std::int64_t>(acc);
  }
  return result;
}

}  // namespace audit
}  // namespace din
