// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "crossyield/dataset.hpp"
#include "crossyield/matrix.hpp"

namespace crossyield {

class Rng;

/// Widths and regularization knobs of the network.
struct HyperParams {
  int k1 = 32;  // GMF embedding width (inbred and tester)
  int k2 = 32;  // MLP parent embedding width
  int kg = 32;  // genetic group embedding width
  int kl = 32;  // location embedding width
  std::vector<int> mlp_widths{64, 32, 16};
  double keep_prob = 0.7;  // inverted dropout after each hidden layer
  double huber_delta = 0.1;

  void validate() const;
};

/// hybrid    : GMF branch (elementwise product of parent embeddings) fused
///             with an MLP over [parent, group, location] embeddings.
/// gmf_only  : GMF branch with its own linear head, no bias.
/// nn_only   : the MLP branch with a scalar head.
/// coarse    : the MLP on [group, location] only; no parent identities.
enum class ModelKind { hybrid, gmf_only, nn_only, coarse };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// One fully-connected layer, y = x W + b with W laid out in x out.
struct AffineLayer {
  Matrix weight;
  Matrix bias;  // 1 x out
};

/// Name-addressed view of a parameter tensor; what optimizers and the
/// snapshot container traverse.
struct NamedTensor {
  std::string name;
  Matrix* tensor;
};
struct ConstNamedTensor {
  std::string name;
  const Matrix* tensor;
};

/// Parameter container for every model kind. Tensors a kind does not own
/// stay empty (0x0) and are skipped by tensors(). The hybrid keeps the
/// standalone GMF head around (it is part of the parameter set and of
/// snapshots) but its forward pass never reads it, so its gradient is zero.
struct ModelParams {
  ModelKind kind = ModelKind::hybrid;
  HyperParams hyper;
  int n_inbreds = 0;
  int n_testers = 0;
  int n_groups = 0;
  int n_locations = 0;

  Matrix gmf_inbred_embed;   // n_b x k1
  Matrix gmf_tester_embed;   // n_t x k1
  Matrix nn_inbred_embed;    // n_b x k2
  Matrix nn_tester_embed;    // n_t x k2
  Matrix group_embed;        // n_g x kg
  Matrix location_embed;     // n_l x kl
  std::vector<AffineLayer> mlp;
  Matrix gmf_output_w;  // k1 x 1
  Matrix nn_output_w;   // last hidden width x 1
  Matrix nn_output_b;   // 1 x 1
  Matrix fusion_w;      // (k1 + last hidden width) x 1
  Matrix fusion_b;      // 1 x 1

  /// The kind's live tensors in a fixed canonical order.
  std::vector<NamedTensor> tensors();
  std::vector<ConstNamedTensor> tensors() const;

  /// Width of the MLP input for this kind (0 for gmf_only).
  int mlp_input_width() const;

  /// Shape-checks every tensor against (kind, hyper, dims) and requires
  /// finite entries.
  void validate() const;

  bool all_finite() const;
};

/// Xavier-initialized parameters for the given kind; biases start at zero.
ModelParams init_params(ModelKind kind, const HyperParams& hyper, int n_inbreds, int n_testers,
                        int n_groups, int n_locations, Rng& rng);

/// Same structure as `like` with every tensor zeroed; the gradient container.
ModelParams zeros_like(const ModelParams& like);

enum class Mode { train, infer };

/// Everything backward() needs, captured during one forward call.
struct ForwardTrace {
  int inbred = 0, tester = 0, group = 0, location = 0;
  Mode mode = Mode::infer;

  Vec d1b, d1t;  // GMF embeddings
  Vec q_gmf;     // d1b elementwise d1t
  double gmf_standalone = 0.0;

  Vec nn_input;                 // concatenated MLP input
  std::vector<Vec> pre;         // per layer, before ReLU
  std::vector<Vec> post;        // per layer, after ReLU and dropout
  std::vector<Vec> drop_scale;  // per layer, 0 or 1/keep_prob per unit
  Vec q_nn;                     // last hidden activation

  double prediction = 0.0;
};

/// Row `id` of W; numerically identical to onehot(id) * W.
Vec embed_lookup(const Matrix& W, int id);

/// GMF branch: q = d1b elementwise d1t, standalone = q . gmf_output_w.
/// With gmf_output_w all ones the standalone output is exactly the matrix
/// factorization dot product.
void gmf_forward(const ModelParams& params, int b, int t, ForwardTrace& trace);

/// MLP branch on the trace's nn_input: hidden ReLU layers with inverted
/// dropout in train mode. rng may be null when no dropout can fire.
void nn_forward(const ModelParams& params, Mode mode, Rng* rng, ForwardTrace& trace);

/// Full forward for the params' kind. In train mode with keep_prob < 1 an
/// rng is required; inference is deterministic and rng may be null.
ForwardTrace model_forward(const ModelParams& params, int b, int t, int g, int l, Mode mode,
                           Rng* rng);

/// Convenience: infer-mode prediction for an observation's fields.
double predict(const ModelParams& params, const CrossObservation& obs);

/// Analytic gradients of (loss with dL/dy = upstream) w.r.t. every live
/// tensor, reusing the trace's dropout scales. Embedding gradients touch
/// only the looked-up rows.
ModelParams model_backward(const ModelParams& params, const ForwardTrace& trace, double upstream);

/// Accumulating form: adds this example's gradients into `grads` (shaped
/// like params, e.g. from zeros_like). The batch loop's workhorse.
void model_backward_into(const ModelParams& params, const ForwardTrace& trace, double upstream,
                         ModelParams& grads);

/// Piecewise quadratic/linear loss: 0.5 r^2 for |r| <= delta, else
/// delta |r| - 0.5 delta^2, with r = y - y_hat.
double huber_loss(double y, double y_hat, double delta);

/// dL/dy_hat: -(y - y_hat) on the quadratic branch, -delta sign(y - y_hat)
/// on the linear branch; continuous at |r| = delta.
double huber_grad(double y, double y_hat, double delta);

}  // namespace crossyield
