#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "din/digest.hpp"

namespace din {

// xoshiro256** seeded through splitmix64. Standard library distributions
// are implementation-defined, so every draw here is specified down to the
// bit: runs replay identically regardless of the standard library.
//
// Substreams are forked by name: fork("mask", round, agent) hashes the
// parent seed with the label and indices, so reordering or adding draws
// in one part of the simulation never disturbs another.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // uniform in [0, bound), rejection sampled, bound > 0
  std::uint64_t uniform_u64(std::uint64_t bound);
  // uniform in [lo, hi] inclusive
  std::int64_t uniform_i64(std::int64_t lo, std::int64_t hi);
  // uniform in [0, 1), 53-bit mantissa, exactly representable
  double uniform_double();
  // uniform in [lo, hi)
  double uniform_double(double lo, double hi);
  // approximate standard normal (Irwin-Hall, sum of 12 uniforms minus 6).
  // Avoids libm so generated datasets are byte-stable across platforms.
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  bool chance(double p) { return uniform_double() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_u64(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

  Rng fork(const std::string& label, std::uint64_t a = 0, std::uint64_t b = 0,
           std::uint64_t c = 0) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace din
