#pragma once

#include <cmath>
#include <vector>

#include "din/field.hpp"

namespace din {

// Fixed-point embedding of bounded reals into the field. Weights are
// clamped to [-range, range] and scaled by 2^16; sums of up to max_terms
// encoded values stay far below p/2, so the signed decode never wraps.
struct FixedPointCodec {
  std::int64_t scale = 1 << 16;
  double range = 64.0;
  std::size_t max_terms = 1000;

  bool sum_bound_ok() const {
    // max_terms * scale * range must stay under p/2
    long double bound = static_cast<long double>(max_terms) * scale * range;
    return bound < static_cast<long double>(kFieldPrime) / 2;
  }

  double clamp(double x) const {
    if (x > range) return range;
    if (x < -range) return -range;
    return x;
  }

  std::uint64_t encode(double x) const {
    double c = clamp(x);
    auto q = static_cast<std::int64_t>(std::llround(c * static_cast<double>(scale)));
    return field::from_signed(q);
  }

  // Decode an element that may be a sum of up to max_terms encodings.
  double decode(std::uint64_t v) const {
    return static_cast<double>(field::to_signed(v)) / static_cast<double>(scale);
  }

  // Encode without clamping, for values that are already sums of clamped
  // terms (subgroup aggregates). Still guarded against field wrap.
  std::uint64_t encode_wide(double x) const {
    auto q = static_cast<std::int64_t>(std::llround(x * static_cast<double>(scale)));
    std::int64_t limit = static_cast<std::int64_t>(max_terms) * scale *
                         static_cast<std::int64_t>(range);
    if (q > limit || q < -limit) fail(ErrorCode::OutOfRange, "sum outside codec bound");
    return field::from_signed(q);
  }

  std::vector<std::uint64_t> encode_vector(const std::vector<double>& xs) const {
    std::vector<std::uint64_t> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = encode(xs[i]);
    return out;
  }

  std::vector<double> decode_vector(const std::vector<std::uint64_t>& vs) const {
    std::vector<double> out(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) out[i] = decode(vs[i]);
    return out;
  }
};

}  // namespace din
