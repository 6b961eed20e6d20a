// SPDX-License-Identifier: Apache-2.0
#include "crossyield/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "crossyield/rng.hpp"

namespace crossyield {

namespace {

std::vector<Matrix*> tensor_ptrs(ModelParams& p) {
  std::vector<Matrix*> out;
  for (auto& nt : p.tensors()) out.push_back(nt.tensor);
  return out;
}

std::vector<const Matrix*> tensor_ptrs(const ModelParams& p) {
  std::vector<const Matrix*> out;
  for (const auto& nt : p.tensors()) out.push_back(nt.tensor);
  return out;
}

double eval_rmse_on(const ModelParams& params, const Dataset& ds,
                    const std::vector<std::size_t>& indices) {
  double ss = 0.0;
  for (std::size_t i : indices) {
    const auto& o = ds.observations[i];
    const double r = o.yield - predict(params, o);
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(indices.size()));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InputError("train config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InputError("train config: learning_rate must be > 0");
  if (max_iterations < 1) throw InputError("train config: max_iterations must be >= 1");
  if (!(huber_delta > 0.0)) throw InputError("train config: huber_delta must be > 0");
  if (!(keep_prob > 0.0) || keep_prob > 1.0)
    throw InputError("train config: keep_prob must be in (0,1]");
  if (eval_every < 0) throw InputError("train config: eval_every must be >= 0");
  adam().validate();
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

TrainResult train_model(ModelKind kind, const Dataset& ds,
                        const std::vector<std::size_t>& train_indices, const HyperParams& hyper,
                        const TrainConfig& config, const std::vector<std::size_t>* eval_indices) {
  config.validate();
  HyperParams h = hyper;
  h.keep_prob = config.keep_prob;
  h.huber_delta = config.huber_delta;
  Rng init_rng(derive_seed(config.seed, kInitSalt));
  ModelParams params =
      init_params(kind, h, ds.n_inbreds, ds.n_testers, ds.n_groups, ds.n_locations, init_rng);
  return train_model_from(std::move(params), ds, train_indices, config, eval_indices);
}

TrainResult train_model_from(ModelParams init, const Dataset& ds,
                             const std::vector<std::size_t>& train_indices,
                             const TrainConfig& config,
                             const std::vector<std::size_t>* eval_indices) {
  config.validate();
  if (train_indices.empty()) throw InputError("train: empty training set");
  for (std::size_t i : train_indices) {
    if (i >= ds.size())
      throw InputError("train: index " + std::to_string(i) + " out of range");
  }
  if (eval_indices != nullptr) {
    if (eval_indices->empty()) throw InputError("train: empty eval set");
    for (std::size_t i : *eval_indices) {
      if (i >= ds.size())
        throw InputError("train: eval index " + std::to_string(i) + " out of range");
    }
  }
  init.validate();

  TrainResult result;
  result.params = std::move(init);
  ModelParams& params = result.params;
  params.hyper.keep_prob = config.keep_prob;
  params.hyper.huber_delta = config.huber_delta;

  ModelParams grads = zeros_like(params);
  auto param_list = tensor_ptrs(params);
  auto grad_fill = tensor_ptrs(grads);
  auto grad_list = tensor_ptrs(static_cast<const ModelParams&>(grads));
  AdamState adam = make_adam_state(tensor_ptrs(static_cast<const ModelParams&>(params)));
  const AdamConfig adam_cfg = config.adam();

  Rng shuffle_rng(derive_seed(config.seed, kShuffleSalt));
  const std::uint64_t dropout_root = derive_seed(config.seed, kDropoutSalt);
  const bool needs_dropout = config.keep_prob < 1.0;

  std::vector<std::size_t> order = train_indices;
  std::size_t cursor = order.size();  // force an initial shuffle
  std::uint64_t example_counter = 0;
  result.history.reserve(static_cast<std::size_t>(config.max_iterations));

  for (long long iter = 1; iter <= config.max_iterations; ++iter) {
    if (cursor >= order.size()) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - cursor);

    for (Matrix* g : grad_fill) g->fill(0.0);
    double batch_loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(take);
    for (std::size_t k = 0; k < take; ++k) {
      const auto& o = ds.observations[order[cursor + k]];
      ForwardTrace trace;
      if (needs_dropout) {
        Rng drop_rng(derive_seed(dropout_root, example_counter));
        trace = model_forward(params, o.inbred, o.tester, o.genetic_group, o.location,
                              Mode::train, &drop_rng);
      } else {
        trace = model_forward(params, o.inbred, o.tester, o.genetic_group, o.location,
                              Mode::train, nullptr);
      }
      ++example_counter;
      batch_loss += huber_loss(o.yield, trace.prediction, config.huber_delta);
      const double upstream =
          huber_grad(o.yield, trace.prediction, config.huber_delta) * inv_n;
      model_backward_into(params, trace, upstream, grads);
    }
    cursor += take;

    adam_step(param_list, grad_list, adam, adam_cfg);
    if (!params.all_finite()) {
      throw InputError("train: non-finite parameters at iteration " + std::to_string(iter));
    }

    LossPoint point;
    point.iteration = iter;
    point.train_loss = batch_loss * inv_n;
    if (eval_indices != nullptr && config.eval_every > 0 &&
        (iter % config.eval_every == 0 || iter == config.max_iterations)) {
      point.eval_rmse = eval_rmse_on(params, ds, *eval_indices);
    }
    result.history.push_back(point);
  }
  return result;
}

PretrainStages pretrain_hybrid_stages(const Dataset& ds,
                                      const std::vector<std::size_t>& train_indices,
                                      const HyperParams& hyper, const TrainConfig& config) {
  config.validate();
  TrainConfig stage = config;
  stage.pretrain = false;
  stage.max_iterations =
      config.pretrain_iterations >= 0 ? config.pretrain_iterations : config.max_iterations;

  // Fresh hybrid on the same init path a plain run would use, so a
  // zero-iteration pretrain is an ordinary Xavier initialization.
  Rng init_rng(derive_seed(config.seed, kInitSalt));
  HyperParams h = hyper;
  h.keep_prob = config.keep_prob;
  h.huber_delta = config.huber_delta;
  PretrainStages out;
  out.init = init_params(ModelKind::hybrid, h, ds.n_inbreds, ds.n_testers, ds.n_groups,
                         ds.n_locations, init_rng);

  if (stage.max_iterations == 0) return out;

  TrainConfig gmf_cfg = stage;
  gmf_cfg.seed = derive_seed(config.seed, kGmfStageSalt);
  out.gmf_stage = train_model(ModelKind::gmf_only, ds, train_indices, hyper, gmf_cfg);

  TrainConfig nn_cfg = stage;
  nn_cfg.seed = derive_seed(config.seed, kNnStageSalt);
  out.nn_stage = train_model(ModelKind::nn_only, ds, train_indices, hyper, nn_cfg);

  // Transfer the six embedding tables and nothing else.
  out.init.gmf_inbred_embed = out.gmf_stage.params.gmf_inbred_embed;
  out.init.gmf_tester_embed = out.gmf_stage.params.gmf_tester_embed;
  out.init.nn_inbred_embed = out.nn_stage.params.nn_inbred_embed;
  out.init.nn_tester_embed = out.nn_stage.params.nn_tester_embed;
  out.init.group_embed = out.nn_stage.params.group_embed;
  out.init.location_embed = out.nn_stage.params.location_embed;
  return out;
}

ModelParams pretrain_hybrid(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                            const HyperParams& hyper, const TrainConfig& config) {
  return pretrain_hybrid_stages(ds, train_indices, hyper, config).init;
}

void write_loss_history(const std::vector<LossPoint>& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("write_loss_history: cannot open " + path);
  bool any_eval = false;
  for (const auto& p : history) any_eval = any_eval || p.eval_rmse >= 0.0;
  out << (any_eval ? "iteration,train_loss,eval_rmse\n" : "iteration,train_loss\n");
  for (const auto& p : history) {
    out << p.iteration << ',' << format_double(p.train_loss);
    if (any_eval) {
      out << ',';
      if (p.eval_rmse >= 0.0) out << format_double(p.eval_rmse);
    }
    out << "\n";
  }
  if (!out) throw InputError("write_loss_history: write failed for " + path);
}

}  // namespace crossyield
