#pragma once

#include <cstdint>

#include "din/common.hpp"

namespace din {

// Prime field for masked aggregation: p = 2^61 - 1 (Mersenne). Fits a
// u64 with headroom, products reduce through __int128. Values are kept
// canonical in [0, p).
inline constexpr std::uint64_t kFieldPrime = 2305843009213693951ULL;

namespace field {

inline std::uint64_t reduce(std::uint64_t v) { return v >= kFieldPrime ? v - kFieldPrime : v; }

inline std::uint64_t add(std::uint64_t a, std::uint64_t b) { return reduce(a + b); }

inline std::uint64_t sub(std::uint64_t a, std::uint64_t b) {
  return reduce(a + kFieldPrime - b);
}

inline std::uint64_t neg(std::uint64_t a) { return a == 0 ? 0 : kFieldPrime - a; }

inline std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(a) * b) % kFieldPrime);
}

inline std::uint64_t pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t acc = 1;
  while (exp) {
    if (exp & 1) acc = mul(acc, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return acc;
}

// Fermat inverse; a != 0
inline std::uint64_t inv(std::uint64_t a) {
  if (a == 0) fail(ErrorCode::OutOfRange, "field inverse of zero");
  return pow(a, kFieldPrime - 2);
}

// Interpret a canonical element as a signed integer in (-p/2, p/2].
inline std::int64_t to_signed(std::uint64_t a) {
  if (a > kFieldPrime / 2) return static_cast<std::int64_t>(a) -
                                  static_cast<std::int64_t>(kFieldPrime);
  return static_cast<std::int64_t>(a);
}

// Embed a signed integer, |v| < p/2.
inline std::uint64_t from_signed(std::int64_t v) {
  if (v >= 0) return static_cast<std::uint64_t>(v);
  return kFieldPrime - static_cast<std::uint64_t>(-v);
}

}  // namespace field
}  // namespace din
