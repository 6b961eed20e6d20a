// SPDX-License-Identifier: Apache-2.0
#include "crossyield/rng.hpp"

#include <cmath>

namespace crossyield {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw InputError("rng_uniform_index: n must be positive");
  // Lemire 2019: multiply into 128 bits, reject the biased low slice.
  std::uint64_t x = engine_();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = engine_();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::gaussian(double mean, double stddev) {
  if (!(stddev >= 0.0)) throw InputError("rng_gaussian: stddev must be >= 0");
  double z;
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    z = cached_gaussian_;
  } else {
    // u1 in (0,1] keeps log finite; u2 in [0,1).
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    z = r * std::cos(theta);
    cached_gaussian_ = r * std::sin(theta);
    has_cached_gaussian_ = true;
  }
  return mean + stddev * z;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace crossyield
