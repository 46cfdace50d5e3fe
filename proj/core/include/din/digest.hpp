#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "din/common.hpp"

namespace din {

// SHA-256 digest. Used for content ids, commitments, state digests and
// substream seed derivation; 256 bits comfortably clears the collision
// resistance bar the protocol needs.
struct Digest256 {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest256&) const = default;

  std::string hex() const { return to_hex(bytes.data(), bytes.size()); }
  static Digest256 from_hex(const std::string& hex);

  // first 8 bytes, little endian; handy as an RNG seed word
  std::uint64_t word64() const;
};

Digest256 sha256(const void* data, std::size_t len);
Digest256 sha256(const std::vector<std::uint8_t>& data);
Digest256 sha256(const std::string& data);

// Incremental builder for hashing structured records without gluing
// strings together. Length-prefixes every chunk so field boundaries
// can't be confused.
class DigestBuilder {
 public:
  DigestBuilder& add_bytes(const void* data, std::size_t len);
  DigestBuilder& add_u64(std::uint64_t v);
  DigestBuilder& add_i64(std::int64_t v) { return add_u64(static_cast<std::uint64_t>(v)); }
  DigestBuilder& add_u32(std::uint32_t v) { return add_u64(v); }
  DigestBuilder& add_string(const std::string& s);
  Digest256 finish() const;

 private:
  std::vector<std::uint8_t> buf_;
};

}  // namespace din
