// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossyield/adam.hpp"
#include "crossyield/dataset.hpp"
#include "crossyield/model.hpp"

namespace crossyield {

/// Optimization settings. keep_prob and huber_delta live here as the train
/// time source of truth: train_model copies them onto the HyperParams it
/// initializes with, so one config fully determines a run.
struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 3e-4;  // "0.03%"
  long long max_iterations = 70000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double huber_delta = 0.1;
  double keep_prob = 0.7;
  std::uint64_t seed = 1;
  long long eval_every = 0;  // 0 = no periodic eval
  bool pretrain = false;
  long long pretrain_iterations = -1;  // -1 = same as max_iterations

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

/// Seed-tree salts. Every random stream in a run is derive_seed(seed, salt)
/// for one of these, so any stage can be reproduced in isolation: the stage
/// seeds let a caller rerun exactly the gmf/nn legs a pre-training pass used.
inline constexpr std::uint64_t kInitSalt = 0x696e6974;      // parameter init
inline constexpr std::uint64_t kShuffleSalt = 0x73687566;   // epoch shuffling
inline constexpr std::uint64_t kDropoutSalt = 0x64726f70;   // per-example dropout
inline constexpr std::uint64_t kGmfStageSalt = 0x676d66;    // pretrain gmf leg
inline constexpr std::uint64_t kNnStageSalt = 0x6e6e;       // pretrain nn leg

struct LossPoint {
  long long iteration = 0;
  double train_loss = 0.0;   // mean Huber loss of the iteration's batch
  double eval_rmse = -1.0;   // -1 when not evaluated at this iteration
};

struct TrainResult {
  ModelParams params;
  std::vector<LossPoint> history;
};

/// Mini-batch training: Xavier init, epoch-shuffled batches (a partial
/// final batch counts as one iteration), per-example Huber gradients
/// averaged over the batch, Adam updates, a finiteness guard every step.
/// Bit-deterministic given (config.seed, dataset, indices).
///
/// train_indices selects the training rows; eval_indices (optional) is
/// scored by RMSE every eval_every iterations.
TrainResult train_model(ModelKind kind, const Dataset& ds,
                        const std::vector<std::size_t>& train_indices, const HyperParams& hyper,
                        const TrainConfig& config,
                        const std::vector<std::size_t>* eval_indices = nullptr);

/// Same loop starting from caller-supplied parameters (pre-training path).
TrainResult train_model_from(ModelParams init, const Dataset& ds,
                             const std::vector<std::size_t>& train_indices,
                             const TrainConfig& config,
                             const std::vector<std::size_t>* eval_indices = nullptr);

/// Two-stage initialization: trains gmf_only and nn_only separately, then
/// plants their embedding tables (and only those) into a freshly
/// Xavier-initialized hybrid. MLP and fusion layers stay fresh.
ModelParams pretrain_hybrid(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                            const HyperParams& hyper, const TrainConfig& config);

/// Same pipeline, keeping the stage runs for callers that archive them.
/// When the effective pretrain iteration count is zero the stages are left
/// default-empty and init is a plain Xavier hybrid.
struct PretrainStages {
  ModelParams init;
  TrainResult gmf_stage;
  TrainResult nn_stage;
};
PretrainStages pretrain_hybrid_stages(const Dataset& ds,
                                      const std::vector<std::size_t>& train_indices,
                                      const HyperParams& hyper, const TrainConfig& config);

/// Convenience for whole-dataset training.
std::vector<std::size_t> all_indices(const Dataset& ds);

/// CSV `iteration,train_loss[,eval_rmse]`; eval column present when any
/// point carries one.
void write_loss_history(const std::vector<LossPoint>& history, const std::string& path);

}  // namespace crossyield
