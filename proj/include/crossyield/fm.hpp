// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "crossyield/dataset.hpp"
#include "crossyield/matrix.hpp"
#include "crossyield/model.hpp"
#include "crossyield/rng.hpp"
#include "crossyield/train.hpp"

namespace crossyield {

/// Factorization machine over the one-hot feature space of the four fields,
/// laid out [inbreds | testers | groups | locations]. Every observation
/// activates exactly one feature per field.
struct FMParams {
  int n_inbreds = 0;
  int n_testers = 0;
  int n_groups = 0;
  int n_locations = 0;
  int latent_dim = 32;

  Matrix w0;  // 1x1 global bias
  Matrix w;   // n_features x 1 linear weights
  Matrix V;   // n_features x latent_dim factor rows

  int n_features() const { return n_inbreds + n_testers + n_groups + n_locations; }
  int inbred_feature(int b) const { return b; }
  int tester_feature(int t) const { return n_inbreds + t; }
  int group_feature(int g) const { return n_inbreds + n_testers + g; }
  int location_feature(int l) const { return n_inbreds + n_testers + n_groups + l; }

  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;
  void validate() const;
  bool all_finite() const;
};

/// Zero bias and linear weights, Xavier factor rows.
FMParams init_fm(int n_inbreds, int n_testers, int n_groups, int n_locations, int latent_dim,
                 Rng& rng);

struct FMTrace {
  std::array<int, 4> active{};       // feature indices, one per field
  Vec factor_sum;                    // per latent dim, sum of active V rows
  double prediction = 0.0;
};

/// w0 + sum of active linear weights + pairwise interactions, the latter via
/// the O(k * fields) identity 0.5 * sum_f [(sum_a V_af)^2 - sum_a V_af^2].
FMTrace fm_forward(const FMParams& params, int inbred, int tester, int group, int location);
double fm_predict(const FMParams& params, const CrossObservation& obs);

/// Accumulates d(upstream * prediction)/d(params) into grads.
void fm_backward_into(const FMParams& params, const FMTrace& trace, double upstream,
                      FMParams& grads);

/// DeepFM: one set of 32-wide field embeddings feeds both the FM pairwise
/// term (as the factor rows of the active features) and, concatenated, a
/// 2-layer ReLU tower. Shared storage is the point: one table update moves
/// both components.
struct DeepFMParams {
  int n_inbreds = 0;
  int n_testers = 0;
  int n_groups = 0;
  int n_locations = 0;
  int latent_dim = 32;
  double keep_prob = 0.6;

  Matrix w0;  // 1x1
  Matrix w;   // n_features x 1
  Matrix inbred_embed;    // n_inbreds x latent_dim
  Matrix tester_embed;    // n_testers x latent_dim
  Matrix group_embed;     // n_groups x latent_dim
  Matrix location_embed;  // n_locations x latent_dim
  std::vector<AffineLayer> deep;  // 4*latent_dim -> 32 -> 32
  Matrix deep_out_w;  // 32x1
  Matrix deep_out_b;  // 1x1

  int n_features() const { return n_inbreds + n_testers + n_groups + n_locations; }

  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;
  void validate() const;
  bool all_finite() const;
};

DeepFMParams init_deepfm(int n_inbreds, int n_testers, int n_groups, int n_locations,
                         int latent_dim, Rng& rng);

struct DeepFMTrace {
  int inbred = 0, tester = 0, group = 0, location = 0;
  Mode mode = Mode::infer;
  Vec factor_sum;                 // FM pairwise term working sum
  Vec deep_input;                 // concatenated embeddings
  std::vector<Vec> pre;           // per deep layer, pre-activation
  std::vector<Vec> post;          // per deep layer, after ReLU and dropout
  std::vector<Vec> drop_scale;    // per deep layer, 0 or 1/keep_prob
  double fm_component = 0.0;
  double deep_component = 0.0;
  double prediction = 0.0;        // fm_component + deep_component
};

DeepFMTrace deepfm_forward(const DeepFMParams& params, int inbred, int tester, int group,
                           int location, Mode mode, Rng* dropout_rng);
double deepfm_predict(const DeepFMParams& params, const CrossObservation& obs);

void deepfm_backward_into(const DeepFMParams& params, const DeepFMTrace& trace, double upstream,
                          DeepFMParams& grads);

/// Mini-batch Huber + Adam loops sharing the network trainer's seed tree
/// and batch schedule (same salts, same epoch shuffling, same NaN guard).
/// config.keep_prob is ignored by both baselines: FM has no dropout, and
/// DeepFM keeps its own fixed keep probability of 0.6.
struct FMTrainResult {
  FMParams params;
  std::vector<LossPoint> history;
};
struct DeepFMTrainResult {
  DeepFMParams params;
  std::vector<LossPoint> history;
};

FMTrainResult train_fm(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                       int latent_dim, const TrainConfig& config);
DeepFMTrainResult train_deepfm(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                               int latent_dim, const TrainConfig& config);

}  // namespace crossyield
