#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tumorfab {

/// SplitMix64 finalizer.
uint64_t mix64(uint64_t x);

/// Derives an independent stream seed from a base seed and a tuple of indices
/// (e.g. epoch, sample). Schedule-independent: depends only on the values.
uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> indices);

/// Portable pseudorandom source. The engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard; the conversions to real numbers are
/// implemented here rather than via <random> distributions, which are
/// implementation-defined.
///
///   uniform()  = (next() >> 11) * 2^-53            in [0, 1)
///   normal()   = Box-Muller cosine branch on two uniforms, 1 - u1 used for the log
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tumorfab
