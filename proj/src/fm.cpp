// SPDX-License-Identifier: Apache-2.0
#include "crossyield/fm.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "crossyield/adam.hpp"

namespace crossyield {

namespace {

constexpr int kDeepWidth = 32;

void check_index(const char* what, int value, int limit) {
  if (value < 0 || value >= limit) {
    throw InputError(std::string("fm: ") + what + " index " + std::to_string(value) +
                     " out of range [0," + std::to_string(limit) + ")");
  }
}

void check_dims(int n_b, int n_t, int n_g, int n_l, int k) {
  if (n_b < 1 || n_t < 1 || n_g < 1 || n_l < 1)
    throw InputError("fm: all field sizes must be >= 1");
  if (k < 1) throw InputError("fm: latent_dim must be >= 1");
}

void require_shape(const char* who, const char* name, const Matrix& m, std::size_t rows,
                   std::size_t cols) {
  if (m.rows() != rows || m.cols() != cols) {
    detail::shape_fail(who, std::string(name) + " is " + detail::shape_str(m.rows(), m.cols()) +
                                ", expected " + detail::shape_str(rows, cols));
  }
}

template <class P>
std::vector<Matrix*> tensor_ptrs(P& p) {
  std::vector<Matrix*> out;
  for (auto& nt : p.tensors()) out.push_back(nt.tensor);
  return out;
}

template <class P>
std::vector<const Matrix*> const_tensor_ptrs(const P& p) {
  std::vector<const Matrix*> out;
  for (const auto& nt : p.tensors()) out.push_back(nt.tensor);
  return out;
}

// The same schedule as the network trainer: epoch-shuffled batches, one
// derived rng per example, mean-of-batch Huber gradients, a finiteness
// guard after every Adam step.
template <class P, class Forward, class Backward>
std::vector<LossPoint> run_minibatch_loop(P& params, const Dataset& ds,
                                          const std::vector<std::size_t>& train_indices,
                                          const TrainConfig& config, bool needs_dropout,
                                          Forward&& forward, Backward&& backward) {
  config.validate();
  if (train_indices.empty()) throw InputError("train: empty training set");
  for (std::size_t i : train_indices) {
    if (i >= ds.size()) throw InputError("train: index " + std::to_string(i) + " out of range");
  }

  P grads = params;
  for (auto& nt : grads.tensors()) nt.tensor->fill(0.0);
  auto param_list = tensor_ptrs(params);
  auto grad_fill = tensor_ptrs(grads);
  auto grad_list = const_tensor_ptrs(grads);
  AdamState adam = make_adam_state(const_tensor_ptrs(params));
  const AdamConfig adam_cfg = config.adam();

  Rng shuffle_rng(derive_seed(config.seed, kShuffleSalt));
  const std::uint64_t dropout_root = derive_seed(config.seed, kDropoutSalt);

  std::vector<std::size_t> order = train_indices;
  std::size_t cursor = order.size();
  std::uint64_t example_counter = 0;
  std::vector<LossPoint> history;
  history.reserve(static_cast<std::size_t>(config.max_iterations));

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
      double prediction;
      if (needs_dropout) {
        Rng drop_rng(derive_seed(dropout_root, example_counter));
        prediction = forward(o, &drop_rng);
      } else {
        prediction = forward(o, nullptr);
      }
      ++example_counter;
      batch_loss += huber_loss(o.yield, prediction, config.huber_delta);
      const double upstream = huber_grad(o.yield, prediction, config.huber_delta) * inv_n;
      backward(upstream, grads);
    }
    cursor += take;

    adam_step(param_list, grad_list, adam, adam_cfg);
    if (!params.all_finite()) {
      throw InputError("train: non-finite parameters at iteration " + std::to_string(iter));
    }

    LossPoint point;
    point.iteration = iter;
    point.train_loss = batch_loss * inv_n;
    history.push_back(point);
  }
  return history;
}

}  // namespace

std::vector<NamedTensor> FMParams::tensors() {
  return {{"w0", &w0}, {"w", &w}, {"V", &V}};
}

std::vector<ConstNamedTensor> FMParams::tensors() const {
  return {{"w0", &w0}, {"w", &w}, {"V", &V}};
}

void FMParams::validate() const {
  check_dims(n_inbreds, n_testers, n_groups, n_locations, latent_dim);
  const auto nf = static_cast<std::size_t>(n_features());
  require_shape("fm", "w0", w0, 1, 1);
  require_shape("fm", "w", w, nf, 1);
  require_shape("fm", "V", V, nf, static_cast<std::size_t>(latent_dim));
  if (!all_finite()) throw InputError("fm: non-finite parameters");
}

bool FMParams::all_finite() const {
  return w0.all_finite() && w.all_finite() && V.all_finite();
}

FMParams init_fm(int n_inbreds, int n_testers, int n_groups, int n_locations, int latent_dim,
                 Rng& rng) {
  check_dims(n_inbreds, n_testers, n_groups, n_locations, latent_dim);
  FMParams p;
  p.n_inbreds = n_inbreds;
  p.n_testers = n_testers;
  p.n_groups = n_groups;
  p.n_locations = n_locations;
  p.latent_dim = latent_dim;
  const auto nf = static_cast<std::size_t>(p.n_features());
  p.w0 = Matrix(1, 1);
  p.w = Matrix(nf, 1);
  p.V = xavier_init(nf, static_cast<std::size_t>(latent_dim), rng);
  return p;
}

FMTrace fm_forward(const FMParams& params, int inbred, int tester, int group, int location) {
  check_index("inbred", inbred, params.n_inbreds);
  check_index("tester", tester, params.n_testers);
  check_index("group", group, params.n_groups);
  check_index("location", location, params.n_locations);

  FMTrace trace;
  trace.active = {params.inbred_feature(inbred), params.tester_feature(tester),
                  params.group_feature(group), params.location_feature(location)};
  const int k = params.latent_dim;
  trace.factor_sum.assign(static_cast<std::size_t>(k), 0.0);

  double acc = params.w0(0, 0);
  double sum_sq = 0.0;
  for (int a : trace.active) {
    acc += params.w(static_cast<std::size_t>(a), 0);
    auto row = params.V.row(static_cast<std::size_t>(a));
    for (int f = 0; f < k; ++f) {
      trace.factor_sum[static_cast<std::size_t>(f)] += row[static_cast<std::size_t>(f)];
      sum_sq += row[static_cast<std::size_t>(f)] * row[static_cast<std::size_t>(f)];
    }
  }
  double interactions = 0.0;
  for (double s : trace.factor_sum) interactions += s * s;
  trace.prediction = acc + 0.5 * (interactions - sum_sq);
  return trace;
}

double fm_predict(const FMParams& params, const CrossObservation& obs) {
  return fm_forward(params, obs.inbred, obs.tester, obs.genetic_group, obs.location).prediction;
}

void fm_backward_into(const FMParams& params, const FMTrace& trace, double upstream,
                      FMParams& grads) {
  grads.w0(0, 0) += upstream;
  const int k = params.latent_dim;
  for (int a : trace.active) {
    grads.w(static_cast<std::size_t>(a), 0) += upstream;
    auto vrow = params.V.row(static_cast<std::size_t>(a));
    auto grow = grads.V.row(static_cast<std::size_t>(a));
    for (int f = 0; f < k; ++f) {
      const auto fi = static_cast<std::size_t>(f);
      grow[fi] += upstream * (trace.factor_sum[fi] - vrow[fi]);
    }
  }
}

std::vector<NamedTensor> DeepFMParams::tensors() {
  std::vector<NamedTensor> out = {{"w0", &w0},
                                  {"w", &w},
                                  {"inbred_embed", &inbred_embed},
                                  {"tester_embed", &tester_embed},
                                  {"group_embed", &group_embed},
                                  {"location_embed", &location_embed}};
  for (std::size_t j = 0; j < deep.size(); ++j) {
    out.push_back({"deep" + std::to_string(j + 1) + "_weight", &deep[j].weight});
    out.push_back({"deep" + std::to_string(j + 1) + "_bias", &deep[j].bias});
  }
  out.push_back({"deep_out_w", &deep_out_w});
  out.push_back({"deep_out_b", &deep_out_b});
  return out;
}

std::vector<ConstNamedTensor> DeepFMParams::tensors() const {
  std::vector<ConstNamedTensor> out = {{"w0", &w0},
                                       {"w", &w},
                                       {"inbred_embed", &inbred_embed},
                                       {"tester_embed", &tester_embed},
                                       {"group_embed", &group_embed},
                                       {"location_embed", &location_embed}};
  for (std::size_t j = 0; j < deep.size(); ++j) {
    out.push_back({"deep" + std::to_string(j + 1) + "_weight", &deep[j].weight});
    out.push_back({"deep" + std::to_string(j + 1) + "_bias", &deep[j].bias});
  }
  out.push_back({"deep_out_w", &deep_out_w});
  out.push_back({"deep_out_b", &deep_out_b});
  return out;
}

void DeepFMParams::validate() const {
  check_dims(n_inbreds, n_testers, n_groups, n_locations, latent_dim);
  if (!(keep_prob > 0.0) || keep_prob > 1.0)
    throw InputError("deepfm: keep_prob must be in (0,1]");
  const auto k = static_cast<std::size_t>(latent_dim);
  const auto nf = static_cast<std::size_t>(n_features());
  require_shape("deepfm", "w0", w0, 1, 1);
  require_shape("deepfm", "w", w, nf, 1);
  require_shape("deepfm", "inbred_embed", inbred_embed, static_cast<std::size_t>(n_inbreds), k);
  require_shape("deepfm", "tester_embed", tester_embed, static_cast<std::size_t>(n_testers), k);
  require_shape("deepfm", "group_embed", group_embed, static_cast<std::size_t>(n_groups), k);
  require_shape("deepfm", "location_embed", location_embed,
                static_cast<std::size_t>(n_locations), k);
  if (deep.empty()) throw InputError("deepfm: deep tower must have at least one layer");
  std::size_t in = 4 * k;
  for (std::size_t j = 0; j < deep.size(); ++j) {
    const auto name_w = "deep" + std::to_string(j + 1) + "_weight";
    if (deep[j].weight.rows() != in) {
      detail::shape_fail("deepfm", name_w + " has " + std::to_string(deep[j].weight.rows()) +
                                       " rows, expected " + std::to_string(in));
    }
    require_shape("deepfm", ("deep" + std::to_string(j + 1) + "_bias").c_str(), deep[j].bias, 1,
                  deep[j].weight.cols());
    in = deep[j].weight.cols();
  }
  require_shape("deepfm", "deep_out_w", deep_out_w, in, 1);
  require_shape("deepfm", "deep_out_b", deep_out_b, 1, 1);
  if (!all_finite()) throw InputError("deepfm: non-finite parameters");
}

bool DeepFMParams::all_finite() const {
  for (const auto& nt : tensors()) {
    if (!nt.tensor->all_finite()) return false;
  }
  return true;
}

DeepFMParams init_deepfm(int n_inbreds, int n_testers, int n_groups, int n_locations,
                         int latent_dim, Rng& rng) {
  check_dims(n_inbreds, n_testers, n_groups, n_locations, latent_dim);
  DeepFMParams p;
  p.n_inbreds = n_inbreds;
  p.n_testers = n_testers;
  p.n_groups = n_groups;
  p.n_locations = n_locations;
  p.latent_dim = latent_dim;
  const auto k = static_cast<std::size_t>(latent_dim);
  const auto nf = static_cast<std::size_t>(p.n_features());
  p.w0 = Matrix(1, 1);
  p.w = Matrix(nf, 1);
  p.inbred_embed = xavier_init(static_cast<std::size_t>(n_inbreds), k, rng);
  p.tester_embed = xavier_init(static_cast<std::size_t>(n_testers), k, rng);
  p.group_embed = xavier_init(static_cast<std::size_t>(n_groups), k, rng);
  p.location_embed = xavier_init(static_cast<std::size_t>(n_locations), k, rng);
  p.deep.resize(2);
  std::size_t in = 4 * k;
  for (auto& layer : p.deep) {
    layer.weight = xavier_init(in, kDeepWidth, rng);
    layer.bias = Matrix(1, kDeepWidth);
    in = kDeepWidth;
  }
  p.deep_out_w = xavier_init(in, 1, rng);
  p.deep_out_b = Matrix(1, 1);
  return p;
}

DeepFMTrace deepfm_forward(const DeepFMParams& params, int inbred, int tester, int group,
                           int location, Mode mode, Rng* dropout_rng) {
  check_index("inbred", inbred, params.n_inbreds);
  check_index("tester", tester, params.n_testers);
  check_index("group", group, params.n_groups);
  check_index("location", location, params.n_locations);

  DeepFMTrace trace;
  trace.inbred = inbred;
  trace.tester = tester;
  trace.group = group;
  trace.location = location;
  trace.mode = mode;

  const auto k = static_cast<std::size_t>(params.latent_dim);
  const std::array<const Matrix*, 4> tables = {&params.inbred_embed, &params.tester_embed,
                                               &params.group_embed, &params.location_embed};
  const std::array<std::size_t, 4> rows = {
      static_cast<std::size_t>(inbred), static_cast<std::size_t>(tester),
      static_cast<std::size_t>(group), static_cast<std::size_t>(location)};
  const std::array<int, 4> features = {
      inbred, params.n_inbreds + tester, params.n_inbreds + params.n_testers + group,
      params.n_inbreds + params.n_testers + params.n_groups + location};

  // FM component over the shared embedding rows.
  trace.factor_sum.assign(k, 0.0);
  double acc = params.w0(0, 0);
  double sum_sq = 0.0;
  trace.deep_input.resize(4 * k);
  for (std::size_t field = 0; field < 4; ++field) {
    acc += params.w(static_cast<std::size_t>(features[field]), 0);
    auto row = tables[field]->row(rows[field]);
    for (std::size_t f = 0; f < k; ++f) {
      trace.factor_sum[f] += row[f];
      sum_sq += row[f] * row[f];
      trace.deep_input[field * k + f] = row[f];
    }
  }
  double interactions = 0.0;
  for (double s : trace.factor_sum) interactions += s * s;
  trace.fm_component = acc + 0.5 * (interactions - sum_sq);

  // Deep tower with inverted dropout after each hidden ReLU.
  const bool drop = mode == Mode::train && params.keep_prob < 1.0;
  if (drop && dropout_rng == nullptr) {
    throw InputError("deepfm_forward: train mode with keep_prob < 1 requires an rng");
  }
  const Vec* x = &trace.deep_input;
  trace.pre.resize(params.deep.size());
  trace.post.resize(params.deep.size());
  trace.drop_scale.resize(params.deep.size());
  for (std::size_t j = 0; j < params.deep.size(); ++j) {
    const Matrix& W = params.deep[j].weight;
    const Matrix& bias = params.deep[j].bias;
    Vec& pre = trace.pre[j];
    pre.assign(W.cols(), 0.0);
    for (std::size_t c = 0; c < W.cols(); ++c) pre[c] = bias(0, c);
    for (std::size_t r = 0; r < W.rows(); ++r) {
      const double xv = (*x)[r];
      if (xv == 0.0) continue;
      auto wrow = W.row(r);
      for (std::size_t c = 0; c < W.cols(); ++c) pre[c] += xv * wrow[c];
    }
    Vec& scale = trace.drop_scale[j];
    scale.assign(W.cols(), 1.0);
    if (drop) {
      const double inv_keep = 1.0 / params.keep_prob;
      for (std::size_t c = 0; c < scale.size(); ++c) {
        scale[c] = dropout_rng->uniform01() < params.keep_prob ? inv_keep : 0.0;
      }
    }
    Vec& post = trace.post[j];
    post.assign(W.cols(), 0.0);
    for (std::size_t c = 0; c < W.cols(); ++c) {
      post[c] = pre[c] > 0.0 ? pre[c] * scale[c] : 0.0;
    }
    x = &post;
  }

  double deep_acc = params.deep_out_b(0, 0);
  for (std::size_t r = 0; r < params.deep_out_w.rows(); ++r) {
    deep_acc += (*x)[r] * params.deep_out_w(r, 0);
  }
  trace.deep_component = deep_acc;
  trace.prediction = trace.fm_component + trace.deep_component;
  return trace;
}

double deepfm_predict(const DeepFMParams& params, const CrossObservation& obs) {
  return deepfm_forward(params, obs.inbred, obs.tester, obs.genetic_group, obs.location,
                        Mode::infer, nullptr)
      .prediction;
}

void deepfm_backward_into(const DeepFMParams& params, const DeepFMTrace& trace, double upstream,
                          DeepFMParams& grads) {
  const auto k = static_cast<std::size_t>(params.latent_dim);
  const std::array<const Matrix*, 4> tables = {&params.inbred_embed, &params.tester_embed,
                                               &params.group_embed, &params.location_embed};
  const std::array<Matrix*, 4> grad_tables = {&grads.inbred_embed, &grads.tester_embed,
                                              &grads.group_embed, &grads.location_embed};
  const std::array<std::size_t, 4> rows = {
      static_cast<std::size_t>(trace.inbred), static_cast<std::size_t>(trace.tester),
      static_cast<std::size_t>(trace.group), static_cast<std::size_t>(trace.location)};
  const std::array<int, 4> features = {
      trace.inbred, params.n_inbreds + trace.tester,
      params.n_inbreds + params.n_testers + trace.group,
      params.n_inbreds + params.n_testers + params.n_groups + trace.location};

  // Deep head.
  const std::size_t last = params.deep.size() - 1;
  grads.deep_out_b(0, 0) += upstream;
  Vec delta(params.deep_out_w.rows(), 0.0);
  for (std::size_t r = 0; r < params.deep_out_w.rows(); ++r) {
    grads.deep_out_w(r, 0) += upstream * trace.post[last][r];
    delta[r] = upstream * params.deep_out_w(r, 0);
  }

  // Reverse pass over the tower; delta enters as d/d(post[j]).
  Vec dinput;
  for (std::size_t j = params.deep.size(); j-- > 0;) {
    const Matrix& W = params.deep[j].weight;
    Vec dpre(W.cols(), 0.0);
    for (std::size_t c = 0; c < W.cols(); ++c) {
      dpre[c] = trace.pre[j][c] > 0.0 ? delta[c] * trace.drop_scale[j][c] : 0.0;
    }
    const Vec& x = j == 0 ? trace.deep_input : trace.post[j - 1];
    for (std::size_t c = 0; c < W.cols(); ++c) grads.deep[j].bias(0, c) += dpre[c];
    for (std::size_t r = 0; r < W.rows(); ++r) {
      const double xv = x[r];
      auto grow = grads.deep[j].weight.row(r);
      for (std::size_t c = 0; c < W.cols(); ++c) grow[c] += xv * dpre[c];
    }
    dinput.assign(W.rows(), 0.0);
    for (std::size_t r = 0; r < W.rows(); ++r) {
      auto wrow = W.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < W.cols(); ++c) acc += wrow[c] * dpre[c];
      dinput[r] = acc;
    }
    delta = dinput;
  }

  // FM component plus the deep-input path, both landing on the shared rows.
  grads.w0(0, 0) += upstream;
  for (std::size_t field = 0; field < 4; ++field) {
    grads.w(static_cast<std::size_t>(features[field]), 0) += upstream;
    auto vrow = tables[field]->row(rows[field]);
    auto grow = grad_tables[field]->row(rows[field]);
    for (std::size_t f = 0; f < k; ++f) {
      grow[f] += upstream * (trace.factor_sum[f] - vrow[f]) + delta[field * k + f];
    }
  }
}

FMTrainResult train_fm(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                       int latent_dim, const TrainConfig& config) {
  config.validate();
  Rng init_rng(derive_seed(config.seed, kInitSalt));
  FMTrainResult result;
  result.params =
      init_fm(ds.n_inbreds, ds.n_testers, ds.n_groups, ds.n_locations, latent_dim, init_rng);
  FMTrace trace;
  auto forward = [&](const CrossObservation& o, Rng*) {
    trace = fm_forward(result.params, o.inbred, o.tester, o.genetic_group, o.location);
    return trace.prediction;
  };
  auto backward = [&](double upstream, FMParams& grads) {
    fm_backward_into(result.params, trace, upstream, grads);
  };
  result.history =
      run_minibatch_loop(result.params, ds, train_indices, config, false, forward, backward);
  return result;
}

DeepFMTrainResult train_deepfm(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                               int latent_dim, const TrainConfig& config) {
  config.validate();
  Rng init_rng(derive_seed(config.seed, kInitSalt));
  DeepFMTrainResult result;
  result.params =
      init_deepfm(ds.n_inbreds, ds.n_testers, ds.n_groups, ds.n_locations, latent_dim, init_rng);
  DeepFMTrace trace;
  auto forward = [&](const CrossObservation& o, Rng* rng) {
    trace = deepfm_forward(result.params, o.inbred, o.tester, o.genetic_group, o.location,
                           Mode::train, rng);
    return trace.prediction;
  };
  auto backward = [&](double upstream, DeepFMParams& grads) {
    deepfm_backward_into(result.params, trace, upstream, grads);
  };
  const bool needs_dropout = result.params.keep_prob < 1.0;
  result.history = run_minibatch_loop(result.params, ds, train_indices, config, needs_dropout,
                                      forward, backward);
  return result;
}

}  // namespace crossyield
