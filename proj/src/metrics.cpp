// SPDX-License-Identifier: Apache-2.0
#include "crossyield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crossyield {

namespace {

void check_pair(const char* op, const Vec& a, const Vec& b) {
  if (a.empty() || b.empty()) throw InputError(std::string(op) + ": empty input");
  if (a.size() != b.size()) {
    throw InputError(std::string(op) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

bool is_constant(const Vec& v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

}  // namespace

double rmse(const Vec& predictions, const Vec& observations) {
  check_pair("rmse", predictions, observations);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - observations[i];
    sum_sq += r * r;
  }
  return std::sqrt(sum_sq / static_cast<double>(predictions.size()));
}

double pearson_pct(const Vec& predictions, const Vec& observations) {
  check_pair("pearson_pct", predictions, observations);
  // A constant vector has zero variance no matter how its mean rounds.
  if (is_constant(predictions) || is_constant(observations)) return 0.0;
  const double n = static_cast<double>(predictions.size());
  double mean_p = 0.0;
  double mean_o = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    mean_p += predictions[i];
    mean_o += observations[i];
  }
  mean_p /= n;
  mean_o /= n;
  double spo = 0.0;
  double spp = 0.0;
  double soo = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double dp = predictions[i] - mean_p;
    const double dobs = observations[i] - mean_o;
    spo += dp * dobs;
    spp += dp * dp;
    soo += dobs * dobs;
  }
  if (spp == 0.0 || soo == 0.0) return 0.0;
  // sqrt of the product (not the product of sqrts) so identical vectors
  // score exactly 100.
  const double r = spo / std::sqrt(spp * soo);
  return std::clamp(r, -1.0, 1.0) * 100.0;
}

}  // namespace crossyield
