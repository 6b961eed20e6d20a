// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crossyield/common.hpp"

namespace crossyield {

/// All randomness in the library flows through this type; there is no global
/// RNG state. The engine is std::mt19937_64, whose output sequence is fixed
/// by the C++ standard, and every derived draw (uniform reals, bounded
/// integers, gaussians) uses the explicit transforms below, so identical
/// seeds give identical streams on every platform.
///
/// An Rng is single-owner: parallel work takes independently seeded
/// instances (see derive_seed).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo,hi). Rejects hi <= lo.
  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw InputError("rng_uniform: empty range [lo,hi)");
    return lo + (hi - lo) * uniform01();
  }

  /// Unbiased integer in [0,n) via Lemire's multiply-and-reject method.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via the Box-Muller transform on two uniforms; the
  /// second value of each pair is cached. Scaled draws reuse the same
  /// standard-normal stream.
  double gaussian(double mean = 0.0, double stddev = 1.0);

  /// Fisher-Yates shuffle, high index downward.
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Random permutation of [0..n).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

/// Deterministic child-seed derivation (splitmix64 finalizer over
/// seed ^ salt). Used wherever independent streams are needed: per-fold
/// training, per-example dropout masks, pre-training stages.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace crossyield
