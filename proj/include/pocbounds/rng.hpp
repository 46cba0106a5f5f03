#pragma once

#include <cstdint>

#include "pocbounds/normal.hpp"

namespace pocbounds {

/// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/// Counter-based generator: value(ctr) = mix64(key + ctr * golden).
///
/// Random access by counter makes every draw a pure function of
/// (seed, counter), so streams can be replayed or sliced without
/// sequential state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix64(seed ^ kKeyTweak)) {}

  std::uint64_t bits(std::uint64_t ctr) const {
    return mix64(key_ + ctr * kGamma);
  }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform(std::uint64_t ctr) const {
    return static_cast<double>(bits(ctr) >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1): strictly interior, safe to feed the normal quantile.
  double uniform_open(std::uint64_t ctr) const {
    return (static_cast<double>(bits(ctr) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via inverse CDF; deterministic in (seed, counter).
  double normal(std::uint64_t ctr) const {
    return normal_quantile(uniform_open(ctr));
  }

  bool bernoulli(std::uint64_t ctr, double p) const {
    return uniform(ctr) < p;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kKeyTweak = 0xD1B54A32D192ED03ull;
  std::uint64_t key_;
};

/// Derives an independent child seed from a master seed and up to three
/// stream indices. Used to give each (model, size, replication) its own
/// reproducible stream regardless of execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix64(master ^ 0x6A09E667F3BCC909ull);
  s = mix64(s + 0x9E3779B97F4A7C15ull * (a + 1));
  s = mix64(s + 0x9E3779B97F4A7C15ull * (b + 1));
  s = mix64(s + 0x9E3779B97F4A7C15ull * (c + 1));
  return s;
}

/// Sequential convenience wrapper over CounterRng.
class SequentialRng {
 public:
  explicit SequentialRng(std::uint64_t seed) : rng_(seed), ctr_(0) {}

  std::uint64_t next_bits() { return rng_.bits(ctr_++); }
  double next_uniform() { return rng_.uniform(ctr_++); }
  double next_uniform_open() { return rng_.uniform_open(ctr_++); }
  double next_normal() { return rng_.normal(ctr_++); }
  bool next_bernoulli(double p) { return rng_.bernoulli(ctr_++, p); }

  std::uint64_t counter() const { return ctr_; }

 private:
  CounterRng rng_;
  std::uint64_t ctr_;
};

}  // namespace pocbounds
