// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "crossyield/matrix.hpp"

namespace crossyield {

/// Exact t-SNE settings. The defaults are the reference algorithm's usual
/// constants: perplexity 30, 1000 iterations, early exaggeration x12 for
/// the first 250 iterations, learning rate 200, and momentum switching
/// from 0.5 to 0.8 when the exaggeration phase ends.
struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TsneResult {
  Matrix embedding;  // n x 2
  Vec kl_history;    // KL(P || Q) against the plain P, one entry per iteration
  bool jittered = false;  // duplicate inputs were perturbed
};

/// Per-point Gaussian calibration: returns the n x n conditional matrix
/// whose row i is p_{j|i} with bandwidth bisected until the row perplexity
/// hits the target (diagonal zero). Rows must be distinct points.
Matrix tsne_conditional_probabilities(const Matrix& points, double perplexity);

/// Exact O(n^2) t-SNE to two dimensions. Deterministic given config.seed.
/// Accepts 3 <= n <= 2000 points (the quadratic variant is meant for the
/// few-hundred-point exports this project produces); requires
/// perplexity < n/3. Exactly duplicated rows are jittered with a tiny
/// seeded perturbation and reported via a stderr warning + the result flag.
TsneResult tsne_embed(const Matrix& points, const TsneConfig& config);

}  // namespace crossyield
