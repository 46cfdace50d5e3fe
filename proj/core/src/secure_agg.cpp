#include "din/secure_agg.hpp"

#include <algorithm>
#include <cstring>
#include <set>

namespace din {
namespace secagg {

std::vector<SecretShare> shamir_share(std::uint64_t secret, std::uint32_t t,
                                      std::uint32_t n, Rng& rng) {
  if (t < 1 || t > n)
    fail(ErrorCode::InvalidThreshold,
         "threshold " + std::to_string(t) + " of " + std::to_string(n));
  if (secret >= kFieldPrime) fail(ErrorCode::OutOfRange, "secret not a field element");

  // coeffs[0] = secret, degree t-1
  std::vector<std::uint64_t> coeffs(t);
  coeffs[0] = secret;
  for (std::uint32_t i = 1; i < t; ++i) coeffs[i] = rng.uniform_u64(kFieldPrime);

  std::vector<SecretShare> shares(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint64_t x = i + 1;
    std::uint64_t acc = 0;
    // Horner, highest coefficient first
    for (std::uint32_t j = t; j-- > 0;) acc = field::add(field::mul(acc, x), coeffs[j]);
    shares[i] = SecretShare{x, acc};
  }
  return shares;
}

std::uint64_t shamir_reconstruct(const std::vector<SecretShare>& shares, std::uint32_t t) {
  if (t < 1) fail(ErrorCode::InvalidThreshold, "threshold must be positive");
  if (shares.size() < t)
    fail(ErrorCode::TooFewShares, std::to_string(shares.size()) + " shares, need " +
                                      std::to_string(t));
  std::set<std::uint64_t> seen;
  for (const auto& s : shares)
    if (!seen.insert(s.index).second)
      fail(ErrorCode::DuplicateIndex, "share index " + std::to_string(s.index));

  // Lagrange basis at x = 0 over the first t shares
  std::uint64_t secret = 0;
  for (std::uint32_t i = 0; i < t; ++i) {
    std::uint64_t num = 1, den = 1;
    for (std::uint32_t j = 0; j < t; ++j) {
      if (j == i) continue;
      num = field::mul(num, shares[j].index);
      den = field::mul(den, field::sub(shares[j].index, shares[i].index));
    }
    std::uint64_t lagrange = field::mul(num, field::inv(den));
    secret = field::add(secret, field::mul(shares[i].value, lagrange));
  }
  return secret;
}

std::vector<std::uint64_t> mask_stream(std::uint64_t pair_seed, std::uint32_t round,
                                       std::size_t dim) {
  Rng rng = Rng(pair_seed).fork("pairmask", round);
  std::vector<std::uint64_t> out(dim);
  for (auto& v : out) v = rng.uniform_u64(kFieldPrime);
  return out;
}

static void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
static void append_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
static std::uint32_t read_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
static std::uint64_t read_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::vector<std::uint8_t> MaskedUpdate::serialize() const {
  std::vector<std::uint8_t> buf;
  buf.reserve(12 + 8 * values.size());
  buf.push_back('D'); buf.push_back('I'); buf.push_back('N'); buf.push_back('U');
  append_u32(buf, round);
  append_u32(buf, static_cast<std::uint32_t>(values.size()));
  for (auto v : values) append_u64(buf, v);
  return buf;
}

MaskedUpdate MaskedUpdate::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "DINU", 4) != 0)
    fail(ErrorCode::OutOfRange, "not a masked update blob");
  MaskedUpdate u;
  u.round = read_u32(bytes.data() + 4);
  std::uint32_t dim = read_u32(bytes.data() + 8);
  if (bytes.size() != 12 + 8ull * dim)
    fail(ErrorCode::OutOfRange, "masked update blob truncated");
  u.values.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) u.values[i] = read_u64(bytes.data() + 12 + 8ull * i);
  return u;
}

std::uint64_t SubgroupKeys::seed_for(AgentId a, AgentId b) const {
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto it = pair_seeds.find(key);
  if (it == pair_seeds.end())
    fail(ErrorCode::MissingSeed, "no pair seed for agents " + std::to_string(a) + "," +
                                     std::to_string(b));
  return it->second;
}

std::size_t SubgroupKeys::position_of(AgentId a) const {
  auto it = std::lower_bound(members.begin(), members.end(), a);
  if (it == members.end() || *it != a)
    fail(ErrorCode::UnknownParticipant, "agent " + std::to_string(a) + " not in subgroup");
  return static_cast<std::size_t>(it - members.begin());
}

SubgroupKeys setup_subgroup_keys(std::vector<AgentId> members, std::uint32_t threshold,
                                 Rng& rng) {
  std::sort(members.begin(), members.end());
  auto n = static_cast<std::uint32_t>(members.size());
  if (threshold < 1 || threshold > n)
    fail(ErrorCode::InvalidThreshold,
         "threshold " + std::to_string(threshold) + " for subgroup of " + std::to_string(n));

  SubgroupKeys keys;
  keys.members = std::move(members);
  keys.threshold = threshold;
  for (std::size_t i = 0; i < keys.members.size(); ++i) {
    for (std::size_t j = i + 1; j < keys.members.size(); ++j) {
      auto pair = std::make_pair(keys.members[i], keys.members[j]);
      std::uint64_t seed = rng.uniform_u64(kFieldPrime);
      keys.pair_seeds[pair] = seed;
      keys.seed_shares[pair] = shamir_share(seed, threshold, n, rng);
    }
  }
  return keys;
}

MaskedUpdate mask_update(const FixedPointCodec& codec, const std::vector<double>& weights,
                         AgentId self, const SubgroupKeys& keys, std::uint32_t round) {
  if (keys.members.size() > codec.max_terms)
    fail(ErrorCode::OutOfRange, "subgroup exceeds codec sum bound");
  keys.position_of(self);  // membership check

  MaskedUpdate update;
  update.round = round;
  update.values = codec.encode_vector(weights);
  for (AgentId other : keys.members) {
    if (other == self) continue;
    std::uint64_t seed = keys.seed_for(self, other);
    std::vector<std::uint64_t> stream = mask_stream(seed, round, update.values.size());
    for (std::size_t i = 0; i < update.values.size(); ++i) {
      update.values[i] = self < other ? field::add(update.values[i], stream[i])
                                      : field::sub(update.values[i], stream[i]);
    }
  }
  return update;
}

RecoveryShares collect_recovery_shares(const SubgroupKeys& keys,
                                       const std::vector<AgentId>& survivors,
                                       const std::vector<AgentId>& dropouts) {
  RecoveryShares out;
  for (AgentId d : dropouts) {
    for (AgentId s : survivors) {
      auto pair = d < s ? std::make_pair(d, s) : std::make_pair(s, d);
      auto it = keys.seed_shares.find(pair);
      if (it == keys.seed_shares.end())
        fail(ErrorCode::MissingSeed, "no shares for dropout pair");
      std::vector<SecretShare> held;
      held.reserve(survivors.size());
      for (AgentId holder : survivors) {
        std::size_t pos = keys.position_of(holder);
        held.push_back(it->second[pos]);
      }
      out[std::make_pair(d, s)] = std::move(held);
    }
  }
  return out;
}

SubgroupSum unmask_aggregate(const FixedPointCodec& codec,
                             const std::vector<MaskedUpdate>& updates,
                             const std::vector<AgentId>& survivors,
                             const std::vector<AgentId>& dropouts,
                             const RecoveryShares& shares, std::uint32_t threshold,
                             std::uint32_t round) {
  if (updates.empty() || survivors.empty()) fail(ErrorCode::EmptyInput, "no survivor updates");
  if (updates.size() != survivors.size())
    fail(ErrorCode::DimensionMismatch, "updates and survivor list differ in length");

  std::size_t dim = updates[0].values.size();
  std::vector<std::uint64_t> acc(dim, 0);
  for (const auto& u : updates) {
    if (u.values.size() != dim)
      fail(ErrorCode::DimensionMismatch, "masked update dimension mismatch");
    for (std::size_t i = 0; i < dim; ++i) acc[i] = field::add(acc[i], u.values[i]);
  }

  // Survivor-to-survivor masks have cancelled. What is left over are the
  // masks each survivor applied against agents that never submitted:
  // reconstruct those pair seeds and back the masks out.
  for (AgentId d : dropouts) {
    for (AgentId s : survivors) {
      auto key = std::make_pair(d, s);
      auto it = shares.find(key);
      if (it == shares.end())
        fail(ErrorCode::InsufficientShares, "no recovery shares for dropout " +
                                                std::to_string(d));
      if (it->second.size() < threshold)
        fail(ErrorCode::InsufficientShares,
             std::to_string(it->second.size()) + " survivor shares, need " +
                 std::to_string(threshold));
      std::uint64_t seed = shamir_reconstruct(it->second, threshold);
      std::vector<std::uint64_t> stream = mask_stream(seed, round, dim);
      for (std::size_t i = 0; i < dim; ++i) {
        // survivor s applied +stream if s < d, else -stream
        acc[i] = s < d ? field::sub(acc[i], stream[i]) : field::add(acc[i], stream[i]);
      }
    }
  }

  SubgroupSum result;
  result.sum = codec.decode_vector(acc);
  result.count = static_cast<std::uint32_t>(updates.size());
  return result;
}

}  // namespace secagg
}  // namespace din
