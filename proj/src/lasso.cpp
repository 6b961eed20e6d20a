// SPDX-License-Identifier: Apache-2.0
#include "crossyield/lasso.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <string>

namespace crossyield {

namespace {

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

}  // namespace

LassoParams lasso_fit(const Dataset& ds, const std::vector<std::size_t>& train_indices,
                      const LassoConfig& config) {
  if (train_indices.empty()) throw InputError("lasso_fit: empty training set");
  if (config.l1_lambda < 0.0) throw InputError("lasso_fit: l1_lambda must be >= 0");
  if (!(config.tol > 0.0)) throw InputError("lasso_fit: tol must be > 0");
  if (config.max_sweeps < 1) throw InputError("lasso_fit: max_sweeps must be >= 1");

  LassoParams out;
  out.n_inbreds = ds.n_inbreds;
  out.n_testers = ds.n_testers;
  out.n_groups = ds.n_groups;
  out.n_locations = ds.n_locations;
  const auto p = static_cast<std::size_t>(out.n_features());
  const std::size_t n = train_indices.size();
  const double dn = static_cast<double>(n);

  // Sparse design: per row the four active feature indices; per feature its
  // supporting row positions (0..n-1 within the training subset).
  std::vector<std::array<int, 4>> row_features(n);
  std::vector<std::vector<std::size_t>> support(p);
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (train_indices[i] >= ds.size()) {
      throw InputError("lasso_fit: index " + std::to_string(train_indices[i]) +
                       " out of range");
    }
    const auto& o = ds.observations[train_indices[i]];
    row_features[i] = {out.inbred_feature(o.inbred), out.tester_feature(o.tester),
                       out.group_feature(o.genetic_group), out.location_feature(o.location)};
    for (int a : row_features[i]) support[static_cast<std::size_t>(a)].push_back(i);
    y[i] = o.yield;
  }

  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= dn;

  // Population moments of each 0/1 column; constant columns stay inactive.
  Vec mu(p, 0.0), sigma(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double nj = static_cast<double>(support[j].size());
    mu[j] = nj / dn;
    const double var = mu[j] * (1.0 - mu[j]);
    sigma[j] = var > 0.0 ? std::sqrt(var) : 0.0;
  }

  // Residuals r_i = base[i] + shift against the standardized-scale model
  // y ~ y_mean + sum_j beta[j] * (x_ij - mu[j]) / sigma[j].
  Vec base(n);
  for (std::size_t i = 0; i < n; ++i) base[i] = y[i] - y_mean;
  double shift = 0.0;
  Vec beta(p, 0.0);

  out.objective_history.reserve(static_cast<std::size_t>(config.max_sweeps));
  double residual_total = 0.0;

  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    residual_total = 0.0;
    for (double b : base) residual_total += b;
    residual_total += dn * shift;

    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (sigma[j] == 0.0) continue;
      double support_sum = 0.0;
      for (std::size_t i : support[j]) support_sum += base[i];
      support_sum += static_cast<double>(support[j].size()) * shift;

      const double rho =
          (support_sum - mu[j] * residual_total) / (sigma[j] * dn) + beta[j];
      const double beta_new = soft_threshold(rho, config.l1_lambda);
      const double delta = beta_new - beta[j];
      if (delta != 0.0) {
        beta[j] = beta_new;
        const double base_step = delta / sigma[j];
        const double shift_step = delta * mu[j] / sigma[j];
        for (std::size_t i : support[j]) base[i] -= base_step;
        shift += shift_step;
        residual_total +=
            dn * shift_step - static_cast<double>(support[j].size()) * base_step;
      }
      max_change = std::max(max_change, std::abs(delta));
    }

    double rss = 0.0;
    for (double b : base) {
      const double r = b + shift;
      rss += r * r;
    }
    double l1 = 0.0;
    for (double b : beta) l1 += std::abs(b);
    out.objective_history.push_back(rss / (2.0 * dn) + config.l1_lambda * l1);
    out.sweeps_run = sweep + 1;

    if (max_change < config.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged && config.warn_on_nonconvergence) {
    std::fprintf(stderr, "lasso_fit: no convergence after %d sweeps (returning best iterate)\n",
                 out.sweeps_run);
  }

  // Back to the 0/1 feature scale.
  out.coefficients.assign(p, 0.0);
  double intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    if (sigma[j] == 0.0 || beta[j] == 0.0) continue;
    out.coefficients[j] = beta[j] / sigma[j];
    intercept -= beta[j] * mu[j] / sigma[j];
  }
  out.intercept = intercept;
  return out;
}

double lasso_predict(const LassoParams& params, const CrossObservation& obs) {
  auto check = [](const char* what, int v, int limit) {
    if (v < 0 || v >= limit) {
      throw InputError(std::string("lasso_predict: ") + what + " index " + std::to_string(v) +
                       " out of range [0," + std::to_string(limit) + ")");
    }
  };
  check("inbred", obs.inbred, params.n_inbreds);
  check("tester", obs.tester, params.n_testers);
  check("group", obs.genetic_group, params.n_groups);
  check("location", obs.location, params.n_locations);
  return params.intercept +
         params.coefficients[static_cast<std::size_t>(params.inbred_feature(obs.inbred))] +
         params.coefficients[static_cast<std::size_t>(params.tester_feature(obs.tester))] +
         params.coefficients[static_cast<std::size_t>(
             params.group_feature(obs.genetic_group))] +
         params.coefficients[static_cast<std::size_t>(params.location_feature(obs.location))];
}

}  // namespace crossyield
