#include "doctest.h"

#include "din/codec.hpp"
#include "din/field.hpp"
#include "din/rng.hpp"

using namespace din;

TEST_CASE("field arithmetic stays canonical and obeys the ring laws") {
  Rng rng(0xf1e1d);
  for (int i = 0; i < 2000; ++i) {
    std::uint64_t a = rng.uniform_u64(kFieldPrime);
    std::uint64_t b = rng.uniform_u64(kFieldPrime);
    std::uint64_t c = rng.uniform_u64(kFieldPrime);

    CHECK(field::add(a, b) == field::add(b, a));
    CHECK(field::mul(a, b) == field::mul(b, a));
    CHECK(field::add(field::add(a, b), c) == field::add(a, field::add(b, c)));
    CHECK(field::mul(field::mul(a, b), c) == field::mul(a, field::mul(b, c)));
    CHECK(field::mul(a, field::add(b, c)) ==
          field::add(field::mul(a, b), field::mul(a, c)));
    CHECK(field::sub(field::add(a, b), b) == a);
    CHECK(field::add(a, field::neg(a)) == 0);
    CHECK(field::add(a, b) < kFieldPrime);
    CHECK(field::mul(a, b) < kFieldPrime);
  }
}

TEST_CASE("field inverse and exponentation") {
  Rng rng(0xcafe);
  for (int i = 0; i < 200; ++i) {
    std::uint64_t a = 1 + rng.uniform_u64(kFieldPrime - 1);
    CHECK(field::mul(a, field::inv(a)) == 1);
  }
  CHECK(field::pow(3, 0) == 1);
  CHECK(field::pow(3, 4) == 81);
  // Fermat: a^(p-1) == 1
  CHECK(field::pow(12345, kFieldPrime - 1) == 1);
  CHECK_THROWS_AS(field::inv(0), Error);
}

TEST_CASE("signed embedding round-trips across zero") {
  CHECK(field::from_signed(0) == 0);
  CHECK(field::from_signed(-1) == kFieldPrime - 1);
  CHECK(field::to_signed(kFieldPrime - 1) == -1);
  CHECK(field::to_signed(field::from_signed(123456789)) == 123456789);
  CHECK(field::to_signed(field::from_signed(-987654321)) == -987654321);
  // boundary: p/2 is still nonnegative, p/2 + 1 wraps negative
  CHECK(field::to_signed(kFieldPrime / 2) == static_cast<std::int64_t>(kFieldPrime / 2));
  CHECK(field::to_signed(kFieldPrime / 2 + 1) < 0);
}

TEST_CASE("codec quantizes to the 2^16 grid") {
  FixedPointCodec codec;
  CHECK(codec.sum_bound_ok());

  CHECK(codec.encode(0.0) == 0);
  CHECK(codec.encode(1.0) == 65536);
  CHECK(codec.encode(-1.0) == kFieldPrime - 65536);
  CHECK(codec.decode(codec.encode(1.0)) == doctest::Approx(1.0).epsilon(0));
  CHECK(codec.decode(codec.encode(-2.5)) == doctest::Approx(-2.5).epsilon(0));

  Rng rng(0xabc);
  for (int i = 0; i < 2000; ++i) {
    double x = rng.uniform_double(-100.0, 100.0);
    double back = codec.decode(codec.encode(x));
    double clamped = codec.clamp(x);
    CHECK(std::abs(back - clamped) <= 0.5 / codec.scale);
    // re-encoding a grid value is exact
    CHECK(codec.decode(codec.encode(back)) == back);
  }
}

TEST_CASE("codec clamps instead of wrapping") {
  FixedPointCodec codec;
  CHECK(codec.decode(codec.encode(1e9)) == codec.range);
  CHECK(codec.decode(codec.encode(-1e9)) == -codec.range);
}

TEST_CASE("wide encoding covers sums and rejects overflow") {
  FixedPointCodec codec;
  double big_sum = codec.range * static_cast<double>(codec.max_terms);
  CHECK(codec.decode(codec.encode_wide(big_sum)) == big_sum);
  CHECK(codec.decode(codec.encode_wide(-big_sum)) == -big_sum);
  CHECK_THROWS_AS(codec.encode_wide(big_sum * 1.5), Error);
}

TEST_CASE("sums of encodings decode to the sum of quantized values") {
  FixedPointCodec codec;
  Rng rng(0x5111);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.uniform_u64(40);
    std::uint64_t acc = 0;
    double expect = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = rng.uniform_double(-64.0, 64.0);
      acc = field::add(acc, codec.encode(x));
      expect += codec.decode(codec.encode(x));
    }
    CHECK(codec.decode(acc) == doctest::Approx(expect).epsilon(1e-12));
  }
}
