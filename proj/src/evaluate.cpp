// SPDX-License-Identifier: Apache-2.0
#include "crossyield/evaluate.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <utility>

#include "crossyield/fm.hpp"
#include "crossyield/metrics.hpp"
#include "crossyield/rng.hpp"
#include "crossyield/splits.hpp"

namespace crossyield {

std::string to_string(EvalModel model) {
  switch (model) {
    case EvalModel::hybrid: return "hybrid";
    case EvalModel::gmf_only: return "gmf_only";
    case EvalModel::nn_only: return "nn_only";
    case EvalModel::coarse: return "coarse";
    case EvalModel::fm: return "fm";
    case EvalModel::deepfm: return "deepfm";
    case EvalModel::lasso: return "lasso";
  }
  throw InputError("to_string: unknown model");
}

EvalModel eval_model_from_string(const std::string& name) {
  for (EvalModel m : {EvalModel::hybrid, EvalModel::gmf_only, EvalModel::nn_only,
                      EvalModel::coarse, EvalModel::fm, EvalModel::deepfm, EvalModel::lasso}) {
    if (name == to_string(m)) return m;
  }
  throw InputError("eval_model_from_string: unknown model `" + name + "`");
}

std::string to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::cross_validation: return "cv";
    case Protocol::holdout: return "holdout";
  }
  throw InputError("to_string: unknown protocol");
}

Protocol protocol_from_string(const std::string& name) {
  if (name == "cv") return Protocol::cross_validation;
  if (name == "holdout") return Protocol::holdout;
  throw InputError("protocol_from_string: unknown protocol `" + name + "`");
}

void EvalConfig::validate() const {
  hyper.validate();
  train.validate();
  if (fm_latent_dim <= 0) throw InputError("evaluate: fm_latent_dim must be positive");
  if (cv_folds < 2) throw InputError("evaluate: cv_folds must be at least 2");
}

namespace {

void collect(const PredictFn& model, const Dataset& ds, const std::vector<std::size_t>& indices,
             Vec& pred, Vec& obs) {
  pred.reserve(indices.size());
  obs.reserve(indices.size());
  for (std::size_t i : indices) {
    pred.push_back(model(ds.observations[i]));
    obs.push_back(ds.observations[i].yield);
  }
}

FoldStats score_fold(std::size_t fold, const Vec& train_pred, const Vec& train_obs,
                     const Vec& test_pred, const Vec& test_obs) {
  FoldStats stats;
  stats.fold = fold;
  stats.train_rmse = rmse(train_pred, train_obs);
  stats.train_corr_pct = pearson_pct(train_pred, train_obs);
  stats.test_rmse = rmse(test_pred, test_obs);
  stats.test_corr_pct = pearson_pct(test_pred, test_obs);
  stats.test_count = test_pred.size();
  return stats;
}

}  // namespace

FitFn make_fit(EvalModel model, const EvalConfig& config) {
  config.validate();
  switch (model) {
    case EvalModel::hybrid:
    case EvalModel::gmf_only:
    case EvalModel::nn_only:
    case EvalModel::coarse: {
      ModelKind kind = model == EvalModel::hybrid     ? ModelKind::hybrid
                       : model == EvalModel::gmf_only ? ModelKind::gmf_only
                       : model == EvalModel::nn_only  ? ModelKind::nn_only
                                                      : ModelKind::coarse;
      HyperParams hyper = config.hyper;
      TrainConfig base = config.train;
      return [kind, hyper, base](const Dataset& ds, const std::vector<std::size_t>& idx,
                                 std::uint64_t seed) -> PredictFn {
        TrainConfig tc = base;
        tc.seed = seed;
        TrainResult result;
        if (kind == ModelKind::hybrid && tc.pretrain) {
          result = train_model_from(pretrain_hybrid(ds, idx, hyper, tc), ds, idx, tc);
        } else {
          result = train_model(kind, ds, idx, hyper, tc);
        }
        auto params = std::make_shared<ModelParams>(std::move(result.params));
        return [params](const CrossObservation& o) { return predict(*params, o); };
      };
    }
    case EvalModel::fm: {
      int latent = config.fm_latent_dim;
      TrainConfig base = config.train;
      return [latent, base](const Dataset& ds, const std::vector<std::size_t>& idx,
                            std::uint64_t seed) -> PredictFn {
        TrainConfig tc = base;
        tc.seed = seed;
        auto params = std::make_shared<FMParams>(train_fm(ds, idx, latent, tc).params);
        return [params](const CrossObservation& o) { return fm_predict(*params, o); };
      };
    }
    case EvalModel::deepfm: {
      int latent = config.fm_latent_dim;
      TrainConfig base = config.train;
      return [latent, base](const Dataset& ds, const std::vector<std::size_t>& idx,
                            std::uint64_t seed) -> PredictFn {
        TrainConfig tc = base;
        tc.seed = seed;
        auto params = std::make_shared<DeepFMParams>(train_deepfm(ds, idx, latent, tc).params);
        return [params](const CrossObservation& o) { return deepfm_predict(*params, o); };
      };
    }
    case EvalModel::lasso: {
      LassoConfig lc = config.lasso;
      return [lc](const Dataset& ds, const std::vector<std::size_t>& idx,
                  std::uint64_t) -> PredictFn {
        // Coordinate descent is deterministic; the fold seed is unused.
        auto params = std::make_shared<LassoParams>(lasso_fit(ds, idx, lc));
        return [params](const CrossObservation& o) { return lasso_predict(*params, o); };
      };
    }
  }
  throw InputError("make_fit: unknown model");
}

EvalReport run_cv_with(const FitFn& fit, EvalModel label, const Dataset& ds, int k,
                       std::uint64_t seed) {
  SplitPlan plan = kfold_split(ds, k, derive_seed(seed, kSplitSalt));
  const std::uint64_t fold_root = derive_seed(seed, kFoldSalt);

  EvalReport report;
  report.model = label;
  report.protocol = Protocol::cross_validation;

  Vec pooled_pred;
  Vec pooled_obs;
  pooled_pred.reserve(ds.size());
  pooled_obs.reserve(ds.size());
  double train_rmse_sum = 0.0;
  double train_corr_sum = 0.0;

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    std::vector<std::size_t> train_idx;
    train_idx.reserve(ds.size() - plan.folds[f].size());
    for (std::size_t g = 0; g < plan.folds.size(); ++g) {
      if (g != f) train_idx.insert(train_idx.end(), plan.folds[g].begin(), plan.folds[g].end());
    }
    PredictFn model = fit(ds, train_idx, derive_seed(fold_root, f));

    Vec train_pred, train_obs, test_pred, test_obs;
    collect(model, ds, train_idx, train_pred, train_obs);
    collect(model, ds, plan.folds[f], test_pred, test_obs);

    FoldStats stats = score_fold(f, train_pred, train_obs, test_pred, test_obs);
    train_rmse_sum += stats.train_rmse;
    train_corr_sum += stats.train_corr_pct;
    report.folds.push_back(stats);

    pooled_pred.insert(pooled_pred.end(), test_pred.begin(), test_pred.end());
    pooled_obs.insert(pooled_obs.end(), test_obs.begin(), test_obs.end());
  }

  const double n_folds = static_cast<double>(plan.folds.size());
  report.train_rmse = train_rmse_sum / n_folds;
  report.train_corr_pct = train_corr_sum / n_folds;
  report.test_rmse = rmse(pooled_pred, pooled_obs);
  report.test_corr_pct = pearson_pct(pooled_pred, pooled_obs);
  return report;
}

EvalReport run_holdout_with(const FitFn& fit, EvalModel label, const Dataset& ds,
                            std::size_t n_combos, std::uint64_t seed) {
  if (n_combos == 0) throw InputError("run_holdout: n_combos must be positive");
  SplitPlan plan = holdout_split(ds, n_combos, derive_seed(seed, kSplitSalt));

  std::set<std::pair<int, int>> held_pairs;
  for (const auto& h : plan.held) held_pairs.insert({h.inbred, h.tester});
  for (std::size_t i : plan.train_indices) {
    const auto& o = ds.observations[i];
    if (held_pairs.contains({o.inbred, o.tester})) {
      throw InputError("run_holdout: training rows include a held combination");
    }
  }

  PredictFn model = fit(ds, plan.train_indices, derive_seed(derive_seed(seed, kFoldSalt), 0));

  Vec train_pred, train_obs;
  collect(model, ds, plan.train_indices, train_pred, train_obs);

  Vec test_pred, test_obs;
  test_pred.reserve(plan.held.size());
  test_obs.reserve(plan.held.size());
  for (const auto& h : plan.held) {
    CrossObservation probe;
    probe.inbred = h.inbred;
    probe.tester = h.tester;
    probe.genetic_group = ds.inbred_modal_group[static_cast<std::size_t>(h.inbred)];
    probe.year = 0;
    probe.yield = 0.0;
    double sum = 0.0;
    for (int l = 0; l < ds.n_locations; ++l) {
      probe.location = l;
      sum += model(probe);
    }
    test_pred.push_back(sum / static_cast<double>(ds.n_locations));
    test_obs.push_back(h.mean_yield);
  }

  EvalReport report;
  report.model = label;
  report.protocol = Protocol::holdout;
  report.folds.push_back(score_fold(0, train_pred, train_obs, test_pred, test_obs));
  report.train_rmse = report.folds[0].train_rmse;
  report.train_corr_pct = report.folds[0].train_corr_pct;
  report.test_rmse = report.folds[0].test_rmse;
  report.test_corr_pct = report.folds[0].test_corr_pct;
  return report;
}

EvalReport run_cv(EvalModel model, const Dataset& ds, int k, const EvalConfig& config) {
  return run_cv_with(make_fit(model, config), model, ds, k, config.train.seed);
}

EvalReport run_holdout(EvalModel model, const Dataset& ds, std::size_t n_combos,
                       const EvalConfig& config) {
  return run_holdout_with(make_fit(model, config), model, ds, n_combos, config.train.seed);
}

EvalReport run_coarse(const Dataset& ds, Protocol protocol, const EvalConfig& config) {
  if (protocol == Protocol::cross_validation) {
    return run_cv(EvalModel::coarse, ds, config.cv_folds, config);
  }
  if (config.holdout_combos == 0) {
    throw InputError("run_coarse: holdout_combos must be positive for the holdout protocol");
  }
  return run_holdout(EvalModel::coarse, ds, config.holdout_combos, config);
}

void write_reports_csv(const std::vector<EvalReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("write_reports_csv: cannot open " + path + " for writing");
  out << "model,protocol,train_rmse,train_corr_pct,test_rmse,test_corr_pct\n";
  for (const auto& r : reports) {
    out << to_string(r.model) << ',' << to_string(r.protocol) << ',' << format_double(r.train_rmse)
        << ',' << format_double(r.train_corr_pct) << ',' << format_double(r.test_rmse) << ','
        << format_double(r.test_corr_pct) << '\n';
  }
  if (!out.flush()) throw InputError("write_reports_csv: write failed for " + path);
}

void write_folds_csv(const std::vector<EvalReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("write_folds_csv: cannot open " + path + " for writing");
  out << "model,protocol,fold,train_rmse,train_corr_pct,test_rmse,test_corr_pct,test_count\n";
  for (const auto& r : reports) {
    for (const auto& f : r.folds) {
      out << to_string(r.model) << ',' << to_string(r.protocol) << ',' << f.fold << ','
          << format_double(f.train_rmse) << ',' << format_double(f.train_corr_pct) << ','
          << format_double(f.test_rmse) << ',' << format_double(f.test_corr_pct) << ','
          << f.test_count << '\n';
    }
  }
  if (!out.flush()) throw InputError("write_folds_csv: write failed for " + path);
}

std::string format_reports_text(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "model" << std::setw(9) << "protocol" << std::right
      << std::setw(12) << "train_rmse" << std::setw(13) << "train_corr%" << std::setw(11)
      << "test_rmse" << std::setw(12) << "test_corr%" << '\n';
  out << std::fixed;
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << to_string(r.model) << std::setw(9)
        << to_string(r.protocol) << std::right << std::setprecision(4) << std::setw(12)
        << r.train_rmse << std::setprecision(2) << std::setw(13) << r.train_corr_pct
        << std::setprecision(4) << std::setw(11) << r.test_rmse << std::setprecision(2)
        << std::setw(12) << r.test_corr_pct << '\n';
  }
  return out.str();
}

}  // namespace crossyield
