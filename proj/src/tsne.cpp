// SPDX-License-Identifier: Apache-2.0
#include "crossyield/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include "crossyield/rng.hpp"

namespace crossyield {

namespace {

constexpr std::size_t kMaxPoints = 2000;
constexpr double kProbFloor = 1e-12;
constexpr std::uint64_t kTsneInitSalt = 0x74736e65;    // embedding init stream
constexpr std::uint64_t kTsneJitterSalt = 0x6a697474;  // duplicate jitter stream

Matrix squared_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t f = 0; f < x.cols(); ++f) {
        const double diff = x(i, f) - x(j, f);
        s += diff * diff;
      }
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

/// Entropy (nats) and conditional row for one point at a given precision.
double row_entropy(const Matrix& d, std::size_t i, double beta, Vec& row) {
  const std::size_t n = d.rows();
  double shift = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) shift = std::min(shift, d(i, j));
  }
  double sum = 0.0;
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      row[j] = 0.0;
      continue;
    }
    const double e = std::exp(-beta * (d(i, j) - shift));
    row[j] = e;
    sum += e;
    weighted += (d(i, j) - shift) * e;
  }
  for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
  return std::log(sum) + beta * weighted / sum;
}

}  // namespace

void TsneConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("tsne: " + msg); };
  if (!(perplexity > 0.0)) fail("perplexity must be positive");
  if (iterations < 1) fail("iterations must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(early_exaggeration >= 1.0)) fail("early_exaggeration must be at least 1");
  if (exaggeration_iterations < 0) fail("exaggeration_iterations must be nonnegative");
  if (!(initial_momentum >= 0.0) || initial_momentum >= 1.0 || !(final_momentum >= 0.0) ||
      final_momentum >= 1.0) {
    fail("momenta must lie in [0, 1)");
  }
}

Matrix tsne_conditional_probabilities(const Matrix& points, double perplexity) {
  const std::size_t n = points.rows();
  const double target = std::log(perplexity);
  const Matrix d = squared_distances(points);
  Matrix cond(n, n);
  Vec row(n);

  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_lo = 0.0;
    double beta_hi = std::numeric_limits<double>::infinity();
    // Bisect the precision until the row perplexity matches; 200 rounds is
    // far past double resolution, non-bracketable rows keep the last value.
    for (int round = 0; round < 200; ++round) {
      const double h = row_entropy(d, i, beta, row);
      const double diff = h - target;
      if (std::abs(diff) < 1e-7) break;
      if (diff > 0.0) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta + beta_lo);
      }
    }
    for (std::size_t j = 0; j < n; ++j) cond(i, j) = row[j];
  }
  return cond;
}

TsneResult tsne_embed(const Matrix& points, const TsneConfig& config) {
  config.validate();
  const std::size_t n = points.rows();
  if (n < 3 || n > kMaxPoints) {
    throw InputError("tsne: point count must be between 3 and " + std::to_string(kMaxPoints) +
                     ", got " + std::to_string(n));
  }
  if (points.cols() == 0) throw InputError("tsne: points must have at least one dimension");
  if (!points.all_finite()) throw InputError("tsne: points must be finite");
  if (config.perplexity >= static_cast<double>(n) / 3.0) {
    throw InputError("tsne: perplexity must be below n/3");
  }

  TsneResult result;

  // Duplicate rows make the bandwidth search unsolvable; nudge them apart.
  Matrix x = points;
  {
    Rng jitter(derive_seed(config.seed, kTsneJitterSalt));
    for (int attempt = 0; attempt < 5; ++attempt) {
      const Matrix d = squared_distances(x);
      std::vector<std::size_t> dup;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          if (d(i, j) == 0.0) {
            dup.push_back(i);
            break;
          }
        }
      }
      if (dup.empty()) break;
      if (attempt == 4) throw InputError("tsne: could not separate duplicate points");
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) scale = std::max(scale, d(i, j));
      }
      const double sigma = 1e-7 * std::max(1.0, std::sqrt(scale));
      for (std::size_t i : dup) {
        for (std::size_t f = 0; f < x.cols(); ++f) x(i, f) += sigma * jitter.gaussian();
      }
      std::cerr << "tsne: jittered " << dup.size() << " duplicate point(s)\n";
      result.jittered = true;
    }
  }

  // Symmetrized joint probabilities with the usual floor.
  const Matrix cond = tsne_conditional_probabilities(x, config.perplexity);
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      p(i, j) = std::max((cond(i, j) + cond(j, i)) / (2.0 * static_cast<double>(n)), kProbFloor);
    }
    p(i, i) = kProbFloor;
  }

  Rng rng(derive_seed(config.seed, kTsneInitSalt));
  Matrix y(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 2; ++c) y(i, c) = 1e-2 * rng.gaussian();
  }
  Matrix velocity(n, 2);
  Matrix gains(n, 2);
  gains.fill(1.0);

  Matrix num(n, n);
  Matrix grad(n, 2);
  result.kl_history.reserve(static_cast<std::size_t>(config.iterations));

  for (int iter = 0; iter < config.iterations; ++iter) {
    const bool exaggerated = iter < config.exaggeration_iterations;
    const double p_scale = exaggerated ? config.early_exaggeration : 1.0;
    const double momentum = exaggerated ? config.initial_momentum : config.final_momentum;

    // Student-t affinities of the current embedding.
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d0 = y(i, 0) - y(j, 0);
        const double d1 = y(i, 1) - y(j, 1);
        const double v = 1.0 / (1.0 + d0 * d0 + d1 * d1);
        num(i, j) = v;
        num(j, i) = v;
        z += 2.0 * v;
      }
    }

    double kl = 0.0;
    grad.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = std::max(num(i, j) / z, kProbFloor);
        const double coeff = 4.0 * (p_scale * p(i, j) - q) * num(i, j);
        grad(i, 0) += coeff * (y(i, 0) - y(j, 0));
        grad(i, 1) += coeff * (y(i, 1) - y(j, 1));
        kl += p(i, j) * std::log(p(i, j) / q);
      }
    }
    result.kl_history.push_back(kl);

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (velocity(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
        velocity(i, c) = momentum * velocity(i, c) - config.learning_rate * gains(i, c) * grad(i, c);
        y(i, c) += velocity(i, c);
      }
    }
    double mean0 = 0.0;
    double mean1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean0 += y(i, 0);
      mean1 += y(i, 1);
    }
    mean0 /= static_cast<double>(n);
    mean1 /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y(i, 0) -= mean0;
      y(i, 1) -= mean1;
    }
  }

  result.embedding = std::move(y);
  return result;
}

}  // namespace crossyield
