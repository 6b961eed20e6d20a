// SPDX-License-Identifier: Apache-2.0
#include "crossyield/model.hpp"

#include <cmath>
#include <utility>

#include "crossyield/rng.hpp"

namespace crossyield {

namespace {

double dot(const Vec& a, const Matrix& column) {
  if (column.cols() != 1 || column.rows() != a.size()) {
    detail::shape_fail("dot", "expected " + std::to_string(a.size()) + "x1 column, got " +
                                  detail::shape_str(column.rows(), column.cols()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * column(i, 0);
  return acc;
}

Vec affine_forward(const AffineLayer& layer, const Vec& in) {
  if (layer.weight.rows() != in.size() || layer.bias.rows() != 1 ||
      layer.bias.cols() != layer.weight.cols()) {
    detail::shape_fail("affine_forward",
                       "input length " + std::to_string(in.size()) + " vs weight " +
                           detail::shape_str(layer.weight.rows(), layer.weight.cols()));
  }
  const std::size_t out_n = layer.weight.cols();
  Vec out(layer.bias.row(0).begin(), layer.bias.row(0).end());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double x = in[i];
    const double* wrow = layer.weight.data() + i * out_n;
    for (std::size_t k = 0; k < out_n; ++k) out[k] += x * wrow[k];
  }
  return out;
}

void append(Vec& dst, const Vec& src) { dst.insert(dst.end(), src.begin(), src.end()); }

void check_index(const char* what, int id, int count) {
  if (id < 0 || id >= count) {
    throw InputError(std::string("model_forward: ") + what + " index " + std::to_string(id) +
                     " out of range [0," + std::to_string(count) + ")");
  }
}

// Gradient of the MLP stack given dL/d q_nn; fills grads.mlp and returns
// dL/d nn_input.
Vec mlp_backward(const ModelParams& params, const ForwardTrace& trace, Vec delta,
                 ModelParams& grads) {
  for (int j = static_cast<int>(params.mlp.size()) - 1; j >= 0; --j) {
    const auto ju = static_cast<std::size_t>(j);
    const Vec& pre = trace.pre[ju];
    const Vec& scale = trace.drop_scale[ju];
    const std::size_t width = pre.size();
    // post = relu(pre) * scale, with subgradient 0 at exactly 0.
    Vec dpre(width);
    for (std::size_t i = 0; i < width; ++i) {
      dpre[i] = pre[i] > 0.0 ? delta[i] * scale[i] : 0.0;
    }
    const Vec& in = ju == 0 ? trace.nn_input : trace.post[ju - 1];
    AffineLayer& g = grads.mlp[ju];
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double x = in[i];
      double* grow = g.weight.data() + i * width;
      for (std::size_t k = 0; k < width; ++k) grow[k] += x * dpre[k];
    }
    for (std::size_t k = 0; k < width; ++k) g.bias(0, k) += dpre[k];

    Vec dprev(in.size(), 0.0);
    const Matrix& W = params.mlp[ju].weight;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double* wrow = W.data() + i * width;
      double acc = 0.0;
      for (std::size_t k = 0; k < width; ++k) acc += wrow[k] * dpre[k];
      dprev[i] = acc;
    }
    delta = std::move(dprev);
  }
  return delta;
}

void scatter_row(Matrix& grad, int row, const double* d, std::size_t n) {
  double* dst = grad.data() + static_cast<std::size_t>(row) * grad.cols();
  for (std::size_t i = 0; i < n; ++i) dst[i] += d[i];
}

}  // namespace

void HyperParams::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("hyperparams: " + msg); };
  if (k1 < 1 || k2 < 1 || kg < 1 || kl < 1) fail("embedding widths must be >= 1");
  if (mlp_widths.empty()) fail("mlp_widths must be non-empty");
  for (int w : mlp_widths)
    if (w < 1) fail("mlp widths must be >= 1");
  if (!(keep_prob > 0.0) || keep_prob > 1.0) fail("keep_prob must be in (0,1]");
  if (!(huber_delta > 0.0)) fail("huber_delta must be > 0");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::hybrid: return "hybrid";
    case ModelKind::gmf_only: return "gmf_only";
    case ModelKind::nn_only: return "nn_only";
    case ModelKind::coarse: return "coarse";
  }
  throw InputError("to_string: unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "hybrid") return ModelKind::hybrid;
  if (name == "gmf_only") return ModelKind::gmf_only;
  if (name == "nn_only") return ModelKind::nn_only;
  if (name == "coarse") return ModelKind::coarse;
  throw InputError("unknown model kind `" + name + "`");
}

int ModelParams::mlp_input_width() const {
  switch (kind) {
    case ModelKind::hybrid:
    case ModelKind::nn_only: return 2 * hyper.k2 + hyper.kg + hyper.kl;
    case ModelKind::coarse: return hyper.kg + hyper.kl;
    case ModelKind::gmf_only: return 0;
  }
  throw InputError("mlp_input_width: unknown model kind");
}

namespace {

struct ShapeSpec {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> entries;

  void add(const std::string& name, std::size_t r, std::size_t c) { entries.push_back({name, {r, c}}); }
};

ShapeSpec expected_shapes(ModelKind kind, const HyperParams& h, int n_b, int n_t, int n_g,
                          int n_l) {
  const auto B = static_cast<std::size_t>(n_b);
  const auto T = static_cast<std::size_t>(n_t);
  const auto G = static_cast<std::size_t>(n_g);
  const auto L = static_cast<std::size_t>(n_l);
  const auto k1 = static_cast<std::size_t>(h.k1);
  const auto k2 = static_cast<std::size_t>(h.k2);
  const auto kg = static_cast<std::size_t>(h.kg);
  const auto kl = static_cast<std::size_t>(h.kl);
  const auto last = static_cast<std::size_t>(h.mlp_widths.back());

  ShapeSpec s;
  const bool has_gmf = kind == ModelKind::hybrid || kind == ModelKind::gmf_only;
  const bool has_parent_nn = kind == ModelKind::hybrid || kind == ModelKind::nn_only;
  const bool has_mlp = kind != ModelKind::gmf_only;

  if (has_gmf) {
    s.add("gmf_inbred_embed", B, k1);
    s.add("gmf_tester_embed", T, k1);
  }
  if (has_parent_nn) {
    s.add("nn_inbred_embed", B, k2);
    s.add("nn_tester_embed", T, k2);
  }
  if (has_mlp) {
    s.add("group_embed", G, kg);
    s.add("location_embed", L, kl);
    std::size_t in = has_parent_nn ? 2 * k2 + kg + kl : kg + kl;
    for (std::size_t j = 0; j < h.mlp_widths.size(); ++j) {
      const auto w = static_cast<std::size_t>(h.mlp_widths[j]);
      s.add("mlp" + std::to_string(j + 1) + "_weight", in, w);
      s.add("mlp" + std::to_string(j + 1) + "_bias", 1, w);
      in = w;
    }
  }
  if (has_gmf) s.add("gmf_output_w", k1, 1);
  if (kind == ModelKind::nn_only || kind == ModelKind::coarse) {
    s.add("nn_output_w", last, 1);
    s.add("nn_output_b", 1, 1);
  }
  if (kind == ModelKind::hybrid) {
    s.add("fusion_w", k1 + last, 1);
    s.add("fusion_b", 1, 1);
  }
  return s;
}

template <class Params, class Named>
std::vector<Named> collect_tensors(Params& p) {
  std::vector<Named> out;
  auto add = [&out](const std::string& name, auto* m) {
    if (!m->empty()) out.push_back({name, m});
  };
  add("gmf_inbred_embed", &p.gmf_inbred_embed);
  add("gmf_tester_embed", &p.gmf_tester_embed);
  add("nn_inbred_embed", &p.nn_inbred_embed);
  add("nn_tester_embed", &p.nn_tester_embed);
  add("group_embed", &p.group_embed);
  add("location_embed", &p.location_embed);
  for (std::size_t j = 0; j < p.mlp.size(); ++j) {
    add("mlp" + std::to_string(j + 1) + "_weight", &p.mlp[j].weight);
    add("mlp" + std::to_string(j + 1) + "_bias", &p.mlp[j].bias);
  }
  add("gmf_output_w", &p.gmf_output_w);
  add("nn_output_w", &p.nn_output_w);
  add("nn_output_b", &p.nn_output_b);
  add("fusion_w", &p.fusion_w);
  add("fusion_b", &p.fusion_b);
  return out;
}

}  // namespace

std::vector<NamedTensor> ModelParams::tensors() {
  return collect_tensors<ModelParams, NamedTensor>(*this);
}

std::vector<ConstNamedTensor> ModelParams::tensors() const {
  return collect_tensors<const ModelParams, ConstNamedTensor>(*this);
}

void ModelParams::validate() const {
  hyper.validate();
  ShapeSpec want = expected_shapes(kind, hyper, n_inbreds, n_testers, n_groups, n_locations);
  auto have = tensors();
  if (have.size() != want.entries.size()) {
    detail::shape_fail("model_params", to_string(kind) + " expects " +
                                           std::to_string(want.entries.size()) + " tensors, has " +
                                           std::to_string(have.size()));
  }
  for (std::size_t i = 0; i < have.size(); ++i) {
    const auto& [name, shape] = want.entries[i];
    if (have[i].name != name) {
      detail::shape_fail("model_params", "tensor order mismatch: expected " + name + ", found " +
                                             have[i].name);
    }
    if (have[i].tensor->rows() != shape.first || have[i].tensor->cols() != shape.second) {
      detail::shape_fail("model_params",
                         name + " should be " + detail::shape_str(shape.first, shape.second) +
                             ", is " +
                             detail::shape_str(have[i].tensor->rows(), have[i].tensor->cols()));
    }
  }
  if (!all_finite()) throw InputError("model_params: non-finite entries");
}

bool ModelParams::all_finite() const {
  for (const auto& nt : tensors()) {
    if (!nt.tensor->all_finite()) return false;
  }
  return true;
}

ModelParams init_params(ModelKind kind, const HyperParams& hyper, int n_inbreds, int n_testers,
                        int n_groups, int n_locations, Rng& rng) {
  hyper.validate();
  ModelParams p;
  p.kind = kind;
  p.hyper = hyper;
  p.n_inbreds = n_inbreds;
  p.n_testers = n_testers;
  p.n_groups = n_groups;
  p.n_locations = n_locations;
  p.mlp.resize(kind == ModelKind::gmf_only ? 0 : hyper.mlp_widths.size());

  ShapeSpec want = expected_shapes(kind, hyper, n_inbreds, n_testers, n_groups, n_locations);
  for (const auto& [name, shape] : want.entries) {
    if (shape.first == 0 || shape.second == 0) {
      detail::shape_fail("init_params", name + " has a zero dimension for this dataset");
    }
  }
  // Weights are Xavier draws in canonical tensor order; biases start at 0.
  auto fill = [&](const std::string& name, Matrix& m, std::size_t r, std::size_t c) {
    const bool is_bias = name.ends_with("_bias") || name == "nn_output_b" || name == "fusion_b";
    m = is_bias ? Matrix(r, c) : xavier_init(r, c, rng);
  };
  for (const auto& [name, shape] : want.entries) {
    Matrix* target = nullptr;
    if (name == "gmf_inbred_embed") target = &p.gmf_inbred_embed;
    else if (name == "gmf_tester_embed") target = &p.gmf_tester_embed;
    else if (name == "nn_inbred_embed") target = &p.nn_inbred_embed;
    else if (name == "nn_tester_embed") target = &p.nn_tester_embed;
    else if (name == "group_embed") target = &p.group_embed;
    else if (name == "location_embed") target = &p.location_embed;
    else if (name == "gmf_output_w") target = &p.gmf_output_w;
    else if (name == "nn_output_w") target = &p.nn_output_w;
    else if (name == "nn_output_b") target = &p.nn_output_b;
    else if (name == "fusion_w") target = &p.fusion_w;
    else if (name == "fusion_b") target = &p.fusion_b;
    else if (name.starts_with("mlp")) {
      std::size_t j = std::stoul(name.substr(3)) - 1;  // "mlp<j>_weight" / "mlp<j>_bias"
      target = name.ends_with("_weight") ? &p.mlp[j].weight : &p.mlp[j].bias;
    }
    fill(name, *target, shape.first, shape.second);
  }
  return p;
}

ModelParams zeros_like(const ModelParams& like) {
  ModelParams z;
  z.kind = like.kind;
  z.hyper = like.hyper;
  z.n_inbreds = like.n_inbreds;
  z.n_testers = like.n_testers;
  z.n_groups = like.n_groups;
  z.n_locations = like.n_locations;
  auto zero = [](const Matrix& src) {
    return src.empty() ? Matrix() : Matrix(src.rows(), src.cols());
  };
  z.gmf_inbred_embed = zero(like.gmf_inbred_embed);
  z.gmf_tester_embed = zero(like.gmf_tester_embed);
  z.nn_inbred_embed = zero(like.nn_inbred_embed);
  z.nn_tester_embed = zero(like.nn_tester_embed);
  z.group_embed = zero(like.group_embed);
  z.location_embed = zero(like.location_embed);
  z.mlp.resize(like.mlp.size());
  for (std::size_t j = 0; j < like.mlp.size(); ++j) {
    z.mlp[j].weight = zero(like.mlp[j].weight);
    z.mlp[j].bias = zero(like.mlp[j].bias);
  }
  z.gmf_output_w = zero(like.gmf_output_w);
  z.nn_output_w = zero(like.nn_output_w);
  z.nn_output_b = zero(like.nn_output_b);
  z.fusion_w = zero(like.fusion_w);
  z.fusion_b = zero(like.fusion_b);
  return z;
}

Vec embed_lookup(const Matrix& W, int id) {
  if (id < 0 || static_cast<std::size_t>(id) >= W.rows()) {
    throw InputError("embed_lookup: row " + std::to_string(id) + " out of range for " +
                     std::to_string(W.rows()) + " rows");
  }
  auto r = W.row(static_cast<std::size_t>(id));
  return Vec(r.begin(), r.end());
}

void gmf_forward(const ModelParams& params, int b, int t, ForwardTrace& trace) {
  trace.d1b = embed_lookup(params.gmf_inbred_embed, b);
  trace.d1t = embed_lookup(params.gmf_tester_embed, t);
  trace.q_gmf = elementwise_product(trace.d1b, trace.d1t);
  // The standalone linear head is the gmf_only prediction; the hybrid's
  // fused prediction never reads gmf_output_w.
  if (params.kind == ModelKind::gmf_only) {
    trace.gmf_standalone = dot(trace.q_gmf, params.gmf_output_w);
  }
}

void nn_forward(const ModelParams& params, Mode mode, Rng* rng, ForwardTrace& trace) {
  const double keep = params.hyper.keep_prob;
  const bool drop = mode == Mode::train && keep < 1.0;
  if (drop && rng == nullptr) {
    throw InputError("nn_forward: train mode with keep_prob < 1 requires an rng");
  }
  const std::size_t layers = params.mlp.size();
  trace.pre.resize(layers);
  trace.post.resize(layers);
  trace.drop_scale.resize(layers);
  const Vec* in = &trace.nn_input;
  for (std::size_t j = 0; j < layers; ++j) {
    trace.pre[j] = affine_forward(params.mlp[j], *in);
    const std::size_t width = trace.pre[j].size();
    Vec& scale = trace.drop_scale[j];
    scale.assign(width, 1.0);
    if (drop) {
      const double inv = 1.0 / keep;
      for (std::size_t i = 0; i < width; ++i) {
        scale[i] = rng->uniform01() < keep ? inv : 0.0;
      }
    }
    Vec& post = trace.post[j];
    post.resize(width);
    const Vec& pre = trace.pre[j];
    for (std::size_t i = 0; i < width; ++i) {
      post[i] = pre[i] > 0.0 ? pre[i] * scale[i] : 0.0;
    }
    in = &post;
  }
  trace.q_nn = trace.post.back();
}

ForwardTrace model_forward(const ModelParams& params, int b, int t, int g, int l, Mode mode,
                           Rng* rng) {
  ForwardTrace trace;
  trace.inbred = b;
  trace.tester = t;
  trace.group = g;
  trace.location = l;
  trace.mode = mode;

  const ModelKind kind = params.kind;
  if (kind == ModelKind::hybrid || kind == ModelKind::gmf_only) {
    check_index("inbred", b, params.n_inbreds);
    check_index("tester", t, params.n_testers);
  }
  if (kind != ModelKind::gmf_only) {
    check_index("group", g, params.n_groups);
    check_index("location", l, params.n_locations);
    if (kind != ModelKind::coarse) {
      check_index("inbred", b, params.n_inbreds);
      check_index("tester", t, params.n_testers);
    }
  }

  if (kind == ModelKind::hybrid || kind == ModelKind::gmf_only) {
    gmf_forward(params, b, t, trace);
  }
  if (kind != ModelKind::gmf_only) {
    trace.nn_input.reserve(static_cast<std::size_t>(params.mlp_input_width()));
    if (kind != ModelKind::coarse) {
      append(trace.nn_input, embed_lookup(params.nn_inbred_embed, b));
      append(trace.nn_input, embed_lookup(params.nn_tester_embed, t));
    }
    append(trace.nn_input, embed_lookup(params.group_embed, g));
    append(trace.nn_input, embed_lookup(params.location_embed, l));
    nn_forward(params, mode, rng, trace);
  }

  switch (kind) {
    case ModelKind::hybrid: {
      const std::size_t k1 = trace.q_gmf.size();
      double acc = params.fusion_b(0, 0);
      for (std::size_t i = 0; i < k1; ++i) acc += params.fusion_w(i, 0) * trace.q_gmf[i];
      for (std::size_t i = 0; i < trace.q_nn.size(); ++i)
        acc += params.fusion_w(k1 + i, 0) * trace.q_nn[i];
      trace.prediction = acc;
      break;
    }
    case ModelKind::gmf_only:
      trace.prediction = trace.gmf_standalone;
      break;
    case ModelKind::nn_only:
    case ModelKind::coarse:
      trace.prediction = dot(trace.q_nn, params.nn_output_w) + params.nn_output_b(0, 0);
      break;
  }
  return trace;
}

double predict(const ModelParams& params, const CrossObservation& obs) {
  return model_forward(params, obs.inbred, obs.tester, obs.genetic_group, obs.location,
                       Mode::infer, nullptr)
      .prediction;
}

ModelParams model_backward(const ModelParams& params, const ForwardTrace& trace, double upstream) {
  ModelParams grads = zeros_like(params);
  model_backward_into(params, trace, upstream, grads);
  return grads;
}

void model_backward_into(const ModelParams& params, const ForwardTrace& trace, double upstream,
                         ModelParams& grads) {
  Vec dq_gmf, dq_nn;

  switch (params.kind) {
    case ModelKind::hybrid: {
      const std::size_t k1 = trace.q_gmf.size();
      const std::size_t last = trace.q_nn.size();
      if (params.fusion_w.rows() != k1 + last) {
        detail::shape_fail("model_backward", "fusion_w rows " +
                                                 std::to_string(params.fusion_w.rows()) +
                                                 " vs trace " + std::to_string(k1 + last));
      }
      dq_gmf.resize(k1);
      dq_nn.resize(last);
      for (std::size_t i = 0; i < k1; ++i) {
        grads.fusion_w(i, 0) += trace.q_gmf[i] * upstream;
        dq_gmf[i] = params.fusion_w(i, 0) * upstream;
      }
      for (std::size_t i = 0; i < last; ++i) {
        grads.fusion_w(k1 + i, 0) += trace.q_nn[i] * upstream;
        dq_nn[i] = params.fusion_w(k1 + i, 0) * upstream;
      }
      grads.fusion_b(0, 0) += upstream;
      break;
    }
    case ModelKind::gmf_only: {
      const std::size_t k1 = trace.q_gmf.size();
      dq_gmf.resize(k1);
      for (std::size_t i = 0; i < k1; ++i) {
        grads.gmf_output_w(i, 0) += trace.q_gmf[i] * upstream;
        dq_gmf[i] = params.gmf_output_w(i, 0) * upstream;
      }
      break;
    }
    case ModelKind::nn_only:
    case ModelKind::coarse: {
      const std::size_t last = trace.q_nn.size();
      dq_nn.resize(last);
      for (std::size_t i = 0; i < last; ++i) {
        grads.nn_output_w(i, 0) += trace.q_nn[i] * upstream;
        dq_nn[i] = params.nn_output_w(i, 0) * upstream;
      }
      grads.nn_output_b(0, 0) += upstream;
      break;
    }
  }

  if (!dq_gmf.empty()) {
    // q_gmf = d1b * d1t elementwise: each side's gradient is the other side.
    const std::size_t k1 = dq_gmf.size();
    Vec db(k1), dt(k1);
    for (std::size_t i = 0; i < k1; ++i) {
      db[i] = dq_gmf[i] * trace.d1t[i];
      dt[i] = dq_gmf[i] * trace.d1b[i];
    }
    scatter_row(grads.gmf_inbred_embed, trace.inbred, db.data(), k1);
    scatter_row(grads.gmf_tester_embed, trace.tester, dt.data(), k1);
  }

  if (!dq_nn.empty()) {
    Vec dinput = mlp_backward(params, trace, std::move(dq_nn), grads);
    const double* d = dinput.data();
    if (params.kind != ModelKind::coarse) {
      const auto k2 = static_cast<std::size_t>(params.hyper.k2);
      scatter_row(grads.nn_inbred_embed, trace.inbred, d, k2);
      d += k2;
      scatter_row(grads.nn_tester_embed, trace.tester, d, k2);
      d += k2;
    }
    const auto kg = static_cast<std::size_t>(params.hyper.kg);
    scatter_row(grads.group_embed, trace.group, d, kg);
    d += kg;
    scatter_row(grads.location_embed, trace.location, d, static_cast<std::size_t>(params.hyper.kl));
  }
}

double huber_loss(double y, double y_hat, double delta) {
  if (!(delta > 0.0)) throw InputError("huber_loss: delta must be > 0");
  const double r = y - y_hat;
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * a - 0.5 * delta * delta;
}

double huber_grad(double y, double y_hat, double delta) {
  if (!(delta > 0.0)) throw InputError("huber_grad: delta must be > 0");
  const double r = y - y_hat;
  if (std::abs(r) <= delta) return -r;
  return r > 0.0 ? -delta : delta;
}

}  // namespace crossyield
