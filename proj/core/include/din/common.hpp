#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace din {

// Agents are numbered by the scenario: 0 is the task owner, participants
// and evaluators follow. Strong-ish typedef: exchanged explicitly, never
// mixed with sizes or rounds by accident.
using AgentId = std::uint32_t;
using TaskId = std::uint32_t;

inline constexpr AgentId kOwnerAgent = 0;

enum class ErrorCode {
  InvalidConfig,
  InsufficientDeposit,
  InsufficientBalance,
  TooFewParticipants,
  DuplicateRegistration,
  WrongPhase,
  UnknownParticipant,
  UnknownTask,
  NotOwner,
  InsufficientEvaluators,
  NotAssigned,
  DuplicateCommit,
  RevealMismatch,
  CommitPhaseOpen,
  MissingAttestation,
  ScoresIncomplete,
  NoActiveStake,
  InactiveStake,
  UnknownStake,
  MissingSeed,
  OutOfRange,
  InvalidThreshold,
  TooFewShares,
  DuplicateIndex,
  InsufficientShares,
  DimensionMismatch,
  EmptyInput,
  NotFound,
  UnknownModel,
  UnsupportedMetric,
  UnknownStrategy,
  ScenarioInvalid,
  IncompatibleRuns,
  ReplayMismatch,
  UnknownOp,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

// Exact nonnegative rational, used for protocol parameters (fee split,
// evaluator ratio, tax rate, slash fraction). Arithmetic against integer
// amounts goes through 128-bit intermediates so flooring is exact.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  bool valid() const { return den > 0 && num >= 0; }
  bool at_most_one() const { return valid() && num <= den; }

  // floor(value * num / den), value >= 0
  std::int64_t mul_floor(std::int64_t value) const {
    __int128 p = static_cast<__int128>(value) * num;
    return static_cast<std::int64_t>(p / den);
  }
  // ceil(value * num / den), value >= 0
  std::int64_t mul_ceil(std::int64_t value) const {
    __int128 p = static_cast<__int128>(value) * num;
    return static_cast<std::int64_t>((p + den - 1) / den);
  }
  double as_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
  }
};

// Scores travel as integer micro-units (1e-6) so threshold rules and
// settlement arithmetic stay bit-exact. 1.0 == 1'000'000.
using ScoreMicro = std::int64_t;
inline constexpr ScoreMicro kScoreOne = 1'000'000;

inline ScoreMicro score_from_double(double s) {
  if (s < 0.0) s = 0.0;
  if (s > 1.0) s = 1.0;
  return static_cast<ScoreMicro>(s * 1e6 + 0.5);
}
inline double score_to_double(ScoreMicro s) { return static_cast<double>(s) / 1e6; }

std::string to_hex(const std::uint8_t* data, std::size_t len);
bool from_hex(const std::string& hex, std::uint8_t* out, std::size_t len);

}  // namespace din
