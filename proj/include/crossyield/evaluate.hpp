// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crossyield/common.hpp"
#include "crossyield/dataset.hpp"
#include "crossyield/lasso.hpp"
#include "crossyield/model.hpp"
#include "crossyield/train.hpp"

namespace crossyield {

/// Every model the evaluation harness can fit and score.
enum class EvalModel { hybrid, gmf_only, nn_only, coarse, fm, deepfm, lasso };

enum class Protocol { cross_validation, holdout };

std::string to_string(EvalModel model);
EvalModel eval_model_from_string(const std::string& name);
std::string to_string(Protocol protocol);
Protocol protocol_from_string(const std::string& name);

/// Harness seed-tree salts, same scheme as the trainer's: the fold/holdout
/// assignment and each fold's training stream are derive_seed children of
/// the run seed, so either can be reproduced without rerunning the rest.
inline constexpr std::uint64_t kSplitSalt = 0x73706c69;  // fold/holdout assignment
inline constexpr std::uint64_t kFoldSalt = 0x666f6c64;   // per-fold training streams

/// Metrics for one fold. Holdout reports carry a single entry.
struct FoldStats {
  std::size_t fold = 0;
  double train_rmse = 0.0;
  double train_corr_pct = 0.0;
  double test_rmse = 0.0;
  double test_corr_pct = 0.0;
  std::size_t test_count = 0;
};

/// Headline numbers for one model under one protocol. Cross validation
/// pools test predictions across folds and averages the train metrics;
/// the per-fold breakdown is kept alongside.
struct EvalReport {
  EvalModel model = EvalModel::hybrid;
  Protocol protocol = Protocol::cross_validation;
  double train_rmse = 0.0;
  double train_corr_pct = 0.0;
  double test_rmse = 0.0;
  double test_corr_pct = 0.0;
  std::vector<FoldStats> folds;
};

/// Settings for every model the harness can run. train.seed doubles as the
/// run seed: split assignment and per-fold streams derive from it.
struct EvalConfig {
  HyperParams hyper;             // network models
  TrainConfig train;             // shared optimizer settings + run seed
  int fm_latent_dim = 32;        // fm and deepfm factor width
  LassoConfig lasso;             // lasso solver settings
  int cv_folds = 10;             // used by run_coarse under cross validation
  std::size_t holdout_combos = 0;  // used by run_coarse under holdout

  void validate() const;
};

/// Trained predictor for one observation (the yield field is ignored).
using PredictFn = std::function<double(const CrossObservation&)>;

/// Fits on the given training rows and returns the trained predictor. The
/// final argument seeds that fit's training streams.
using FitFn =
    std::function<PredictFn(const Dataset&, const std::vector<std::size_t>&, std::uint64_t)>;

/// Fit function for a model under the given settings.
FitFn make_fit(EvalModel model, const EvalConfig& config);

/// Protocol drivers with an injectable fitter, used by tests to pass oracle
/// predictors through the pipeline. `label` only tags the report.
EvalReport run_cv_with(const FitFn& fit, EvalModel label, const Dataset& ds, int k,
                       std::uint64_t seed);
EvalReport run_holdout_with(const FitFn& fit, EvalModel label, const Dataset& ds,
                            std::size_t n_combos, std::uint64_t seed);

/// k-fold cross validation over observations: each fold is predicted
/// per observation (location specific) by a model trained on the rest.
EvalReport run_cv(EvalModel model, const Dataset& ds, int k, const EvalConfig& config);

/// Holds out n_combos tested (inbred, tester) pairs, trains on everything
/// else, predicts each held pair at every location index and averages, then
/// scores against the pair's observed mean yield. Training rows never
/// contain a held pair (checked).
EvalReport run_holdout(EvalModel model, const Dataset& ds, std::size_t n_combos,
                       const EvalConfig& config);

/// The coarse variant under either protocol; fold and combo counts come
/// from the config.
EvalReport run_coarse(const Dataset& ds, Protocol protocol, const EvalConfig& config);

/// One CSV row per report: model, protocol, and the four headline metrics.
void write_reports_csv(const std::vector<EvalReport>& reports, const std::string& path);

/// Per-fold breakdown: one CSV row per fold of every report.
void write_folds_csv(const std::vector<EvalReport>& reports, const std::string& path);

/// Fixed-width text table of the headline rows.
std::string format_reports_text(const std::vector<EvalReport>& reports);

}  // namespace crossyield
