// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "crossyield/dataset.hpp"

namespace crossyield {

struct LassoConfig {
  double l1_lambda = 0.8;
  double tol = 1e-8;      // max standardized-coefficient change per sweep
  int max_sweeps = 1000;
  bool warn_on_nonconvergence = true;  // stderr note, best iterate returned
};

/// L1-penalized linear model over the one-hot feature space
/// [inbreds | testers | groups | locations]; coefficients live on the
/// original 0/1 scale, so prediction is intercept plus four lookups.
struct LassoParams {
  int n_inbreds = 0;
  int n_testers = 0;
  int n_groups = 0;
  int n_locations = 0;

  double intercept = 0.0;
  Vec coefficients;  // length n_inbreds + n_testers + n_groups + n_locations

  bool converged = false;
  int sweeps_run = 0;
  /// Objective (1/2n) * RSS + lambda * ||beta_std||_1 after each sweep,
  /// on the standardized scale the solver works in. Non-increasing.
  Vec objective_history;

  int n_features() const { return n_inbreds + n_testers + n_groups + n_locations; }
  int inbred_feature(int b) const { return b; }
  int tester_feature(int t) const { return n_inbreds + t; }
  int group_feature(int g) const { return n_inbreds + n_testers + g; }
  int location_feature(int l) const { return n_inbreds + n_testers + n_groups + l; }
};

/// Cyclic coordinate descent with soft-thresholding. Columns are
/// standardized internally (population mean/std over the training rows);
/// the intercept is unpenalized. Constant columns keep coefficient zero.
/// A sweep costs O(4n) via residual maintenance. Stops when the largest
/// standardized-coefficient change in a sweep is below tol.
LassoParams lasso_fit(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                      const LassoConfig& config);

double lasso_predict(const LassoParams& params, const CrossObservation& obs);

}  // namespace crossyield
