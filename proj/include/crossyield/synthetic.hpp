// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "crossyield/dataset.hpp"
#include "crossyield/matrix.hpp"

namespace crossyield {

/// Generator model, per observation of combination (b, t) at location l:
///
///   yield = global_mean
///         + interaction_scale * dot(U_b, V_t)
///         + location_effect(l) + group_effect(group(b))
///         + Normal(0, noise_std^2)
///
/// U rows are i.i.d. standard normal. V rows are normal with mean
/// tester_factor_mean per entry: a nonzero mean plants true per-parent
/// marginal effects carried only by the latent factors, which the latent
/// separation experiments need. Location and group effect vectors are
/// centered to sum to zero. Each parent is assigned one genetic group
/// uniformly at random; an observation's genetic_group is its inbred's
/// group. A fraction of all (b, t) pairs is observed (covering every
/// parent whenever the budget allows); each observed pair receives a
/// uniform number of replicates at uniformly drawn locations and years.
///
/// The returned Dataset contains exactly the entities that appear in the
/// observations, so writing it to CSV and loading it back reproduces the
/// same index space; the returned GroundTruth is filtered to match.
struct SyntheticConfig {
  int n_inbreds = 60;
  int n_testers = 50;
  int n_locations = 20;
  int n_groups = 5;
  int latent_rank = 8;
  double observed_combo_fraction = 0.05;
  int replicates_min = 10;
  int replicates_max = 20;
  double noise_std = 0.095;
  double interaction_scale = 0.1;
  double location_scale = 0.1;
  double group_scale = 0.1;
  double tester_factor_mean = 0.0;
  double global_mean = 1.002;
  std::uint64_t seed = 1;

  /// Small instance for fast experiments; moments are not calibrated.
  static SyntheticConfig desk_scale(std::uint64_t seed = 1);

  /// Structural targets of the real data: 593 x 496 parents, 280 locations,
  /// 14 groups, 3.71% of combinations observed, ~18.3 replicates per
  /// observed combination, and effect scales calibrated so the yield
  /// distribution is close to 1.002 +/- 0.1047.
  static SyntheticConfig paper_scale(std::uint64_t seed = 1);

  void validate() const;
};

/// Everything needed to score recovery against the generator.
/// Reproducible from (SyntheticConfig, seed).
struct GroundTruth {
  Matrix inbred_factors;   // n_inbreds x latent_rank
  Matrix tester_factors;   // n_testers x latent_rank
  Vec location_effects;    // n_locations
  Vec group_effects;       // n_groups
  std::vector<int> inbred_group;  // per-parent group assignment
  std::vector<int> tester_group;
  double noise_std = 0.0;

  /// Noiseless yield for (b, t, l) under the planted model.
  double true_yield(int inbred, int tester, int location, double interaction_scale,
                    double global_mean) const;
};

std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& config);

}  // namespace crossyield
