// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "crossyield/matrix.hpp"

namespace crossyield {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// First/second moment estimates, parallel to a fixed tensor list. Works
/// over raw tensor pointer lists so the network, FM, and DeepFM parameter
/// sets all share one optimizer.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long long step = 0;
};

/// Zeroed state shaped like the given tensors.
AdamState make_adam_state(const std::vector<const Matrix*>& tensors);

/// One bias-corrected Adam update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// params/grads/state must all match shapes; mismatches are fatal.
void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamConfig& config);

}  // namespace crossyield
