#include "din/digest.hpp"

#include <openssl/evp.h>

#include <cstring>

namespace din {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InsufficientDeposit: return "InsufficientDeposit";
    case ErrorCode::InsufficientBalance: return "InsufficientBalance";
    case ErrorCode::TooFewParticipants: return "TooFewParticipants";
    case ErrorCode::DuplicateRegistration: return "DuplicateRegistration";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::UnknownParticipant: return "UnknownParticipant";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::NotOwner: return "NotOwner";
    case ErrorCode::InsufficientEvaluators: return "InsufficientEvaluators";
    case ErrorCode::NotAssigned: return "NotAssigned";
    case ErrorCode::DuplicateCommit: return "DuplicateCommit";
    case ErrorCode::RevealMismatch: return "RevealMismatch";
    case ErrorCode::CommitPhaseOpen: return "CommitPhaseOpen";
    case ErrorCode::MissingAttestation: return "MissingAttestation";
    case ErrorCode::ScoresIncomplete: return "ScoresIncomplete";
    case ErrorCode::NoActiveStake: return "NoActiveStake";
    case ErrorCode::InactiveStake: return "InactiveStake";
    case ErrorCode::UnknownStake: return "UnknownStake";
    case ErrorCode::MissingSeed: return "MissingSeed";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::TooFewShares: return "TooFewShares";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::InsufficientShares: return "InsufficientShares";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnsupportedMetric: return "UnsupportedMetric";
    case ErrorCode::UnknownStrategy: return "UnknownStrategy";
    case ErrorCode::ScenarioInvalid: return "ScenarioInvalid";
    case ErrorCode::IncompatibleRuns: return "IncompatibleRuns";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::UnknownOp: return "UnknownOp";
  }
  return "Error";
}

std::string to_hex(const std::uint8_t* data, std::size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool from_hex(const std::string& hex, std::uint8_t* out, std::size_t len) {
  if (hex.size() != len * 2) return false;
  for (std::size_t i = 0; i < len; ++i) {
    int hi = hex_nibble(hex[2 * i]);
    int lo = hex_nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return false;
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return true;
}

Digest256 sha256(const void* data, std::size_t len) {
  Digest256 d;
  unsigned int out_len = 0;
  EVP_Digest(data, len, d.bytes.data(), &out_len, EVP_sha256(), nullptr);
  return d;
}

Digest256 sha256(const std::vector<std::uint8_t>& data) {
  return sha256(data.data(), data.size());
}

Digest256 sha256(const std::string& data) { return sha256(data.data(), data.size()); }

Digest256 Digest256::from_hex(const std::string& hex) {
  Digest256 d;
  if (!din::from_hex(hex, d.bytes.data(), d.bytes.size()))
    fail(ErrorCode::OutOfRange, "bad digest hex '" + hex + "'");
  return d;
}

std::uint64_t Digest256::word64() const {
  std::uint64_t w = 0;
  for (int i = 7; i >= 0; --i) w = (w << 8) | bytes[static_cast<std::size_t>(i)];
  return w;
}

DigestBuilder& DigestBuilder::add_bytes(const void* data, std::size_t len) {
  add_u64(len);
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf_.insert(buf_.end(), p, p + len);
  return *this;
}

DigestBuilder& DigestBuilder::add_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    buf_.push_back(static_cast<std::uint8_t>(v & 0xff));
    v >>= 8;
  }
  return *this;
}

DigestBuilder& DigestBuilder::add_string(const std::string& s) {
  return add_bytes(s.data(), s.size());
}

Digest256 DigestBuilder::finish() const { return sha256(buf_.data(), buf_.size()); }

}  // namespace din
