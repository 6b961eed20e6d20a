// SPDX-License-Identifier: Apache-2.0
#include "crossyield/adam.hpp"

#include <cmath>
#include <string>

namespace crossyield {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("adam: learning_rate must be > 0");
  if (!(beta1 >= 0.0) || beta1 >= 1.0) throw InputError("adam: beta1 must be in [0,1)");
  if (!(beta2 >= 0.0) || beta2 >= 1.0) throw InputError("adam: beta2 must be in [0,1)");
  if (!(epsilon > 0.0)) throw InputError("adam: epsilon must be > 0");
}

AdamState make_adam_state(const std::vector<const Matrix*>& tensors) {
  AdamState state;
  state.m.reserve(tensors.size());
  state.v.reserve(tensors.size());
  for (const Matrix* t : tensors) {
    state.m.emplace_back(t->rows(), t->cols());
    state.v.emplace_back(t->rows(), t->cols());
  }
  return state;
}

void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamConfig& config) {
  config.validate();
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    detail::shape_fail("adam_step", "tensor list sizes differ: params " +
                                        std::to_string(params.size()) + ", grads " +
                                        std::to_string(grads.size()) + ", state " +
                                        std::to_string(state.m.size()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& theta = *params[i];
    const Matrix& g = *grads[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (theta.rows() != g.rows() || theta.cols() != g.cols() || theta.rows() != m.rows() ||
        theta.cols() != m.cols()) {
      detail::shape_fail("adam_step", "tensor " + std::to_string(i) + " shapes differ: param " +
                                          detail::shape_str(theta.rows(), theta.cols()) +
                                          ", grad " + detail::shape_str(g.rows(), g.cols()));
    }
    double* tp = theta.data();
    const double* gp = g.data();
    double* mp = m.data();
    double* vp = v.data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      mp[k] = config.beta1 * mp[k] + (1.0 - config.beta1) * gp[k];
      vp[k] = config.beta2 * vp[k] + (1.0 - config.beta2) * gp[k] * gp[k];
      const double m_hat = mp[k] / bc1;
      const double v_hat = vp[k] / bc2;
      tp[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace crossyield
