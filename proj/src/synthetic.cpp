// SPDX-License-Identifier: Apache-2.0
#include "crossyield/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crossyield/rng.hpp"

namespace crossyield {
namespace {

// Zero-padded ids ("B007") so lexicographic id order equals index order.
std::string padded_id(char prefix, int index, int count) {
  std::size_t width = std::to_string(count).size();
  std::string digits = std::to_string(index + 1);
  std::string out(1, prefix);
  out.append(width - digits.size(), '0');
  out += digits;
  return out;
}

Matrix gaussian_matrix(int rows, int cols, double mean, double std, Rng& rng) {
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian(mean, std);
  return m;
}

// Zero-sum effect vector: levels are defined relative to the global mean.
Vec centered_effects(int count, double scale, Rng& rng) {
  Vec e(static_cast<std::size_t>(count));
  for (double& v : e) v = rng.gaussian(0.0, scale);
  double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  for (double& v : e) v -= mean;
  return e;
}

}  // namespace

SyntheticConfig SyntheticConfig::desk_scale(std::uint64_t seed) {
  SyntheticConfig c;
  c.seed = seed;
  c.noise_std = 0.0949;  // 0.3x the planted signal std (~0.316)
  return c;
}

SyntheticConfig SyntheticConfig::paper_scale(std::uint64_t seed) {
  SyntheticConfig c;
  c.n_inbreds = 593;
  c.n_testers = 496;
  c.n_locations = 280;
  c.n_groups = 14;
  c.latent_rank = 8;
  c.observed_combo_fraction = 0.0371;
  c.replicates_min = 14;
  c.replicates_max = 23;
  // Calibrated so the yield std lands near 0.1047 (effect vectors are
  // centered, which shrinks their population variance by (n-1)/n):
  //   0.0205^2*8 + 0.05^2*(279/280) + 0.0415^2*(13/14) + 0.059^2 ~ 0.010933
  //   -> std 0.10456
  c.noise_std = 0.059;
  c.interaction_scale = 0.0205;
  c.location_scale = 0.05;
  c.group_scale = 0.0415;
  c.tester_factor_mean = 0.0;
  c.global_mean = 1.002;
  c.seed = seed;
  return c;
}

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InputError("synthetic config: " + msg); };
  if (n_inbreds < 1 || n_testers < 1 || n_locations < 1 || n_groups < 1)
    fail("entity counts must be positive");
  if (latent_rank < 1) fail("latent_rank must be positive");
  if (!(observed_combo_fraction > 0.0) || observed_combo_fraction > 1.0)
    fail("observed_combo_fraction must be in (0, 1]");
  if (replicates_min < 1 || replicates_max < replicates_min)
    fail("replicate range must satisfy 1 <= min <= max");
  if (!(noise_std >= 0.0)) fail("noise_std must be nonnegative");
  if (!std::isfinite(interaction_scale) || !std::isfinite(location_scale) ||
      !std::isfinite(group_scale) || !std::isfinite(tester_factor_mean) ||
      !std::isfinite(global_mean))
    fail("effect scales must be finite");
}

double GroundTruth::true_yield(int inbred, int tester, int location,
                               double interaction_scale, double global_mean) const {
  auto u = inbred_factors.row(static_cast<std::size_t>(inbred));
  auto v = tester_factors.row(static_cast<std::size_t>(tester));
  double dot = 0.0;
  for (std::size_t f = 0; f < u.size(); ++f) dot += u[f] * v[f];
  return global_mean + interaction_scale * dot +
         location_effects[static_cast<std::size_t>(location)] +
         group_effects[static_cast<std::size_t>(inbred_group[static_cast<std::size_t>(inbred)])];
}

std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);

  GroundTruth truth;
  truth.inbred_factors = gaussian_matrix(config.n_inbreds, config.latent_rank, 0.0, 1.0, rng);
  truth.tester_factors =
      gaussian_matrix(config.n_testers, config.latent_rank, config.tester_factor_mean, 1.0, rng);
  truth.location_effects = centered_effects(config.n_locations, config.location_scale, rng);
  truth.group_effects = centered_effects(config.n_groups, config.group_scale, rng);
  truth.inbred_group.resize(static_cast<std::size_t>(config.n_inbreds));
  for (int& g : truth.inbred_group)
    g = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config.n_groups)));
  truth.tester_group.resize(static_cast<std::size_t>(config.n_testers));
  for (int& g : truth.tester_group)
    g = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config.n_groups)));
  truth.noise_std = config.noise_std;

  // Pick observed combinations: walk a random order of all pairs, first
  // taking pairs that cover a so-far-unseen inbred or tester (so every
  // parent shows up in the data whenever the budget allows), then filling
  // the remainder from the same order.
  const std::size_t total =
      static_cast<std::size_t>(config.n_inbreds) * static_cast<std::size_t>(config.n_testers);
  std::size_t n_combos = static_cast<std::size_t>(
      std::llround(config.observed_combo_fraction * static_cast<double>(total)));
  n_combos = std::clamp<std::size_t>(n_combos, 1, total);

  auto order = rng.permutation(total);
  std::vector<char> taken(total, 0);
  std::vector<char> covered_b(static_cast<std::size_t>(config.n_inbreds), 0);
  std::vector<char> covered_t(static_cast<std::size_t>(config.n_testers), 0);
  std::vector<std::size_t> chosen;
  chosen.reserve(n_combos);
  for (std::size_t idx : order) {
    if (chosen.size() == n_combos) break;
    const auto b = idx / static_cast<std::size_t>(config.n_testers);
    const auto t = idx % static_cast<std::size_t>(config.n_testers);
    if (!covered_b[b] || !covered_t[t]) {
      covered_b[b] = covered_t[t] = 1;
      taken[idx] = 1;
      chosen.push_back(idx);
    }
  }
  for (std::size_t idx : order) {
    if (chosen.size() == n_combos) break;
    if (!taken[idx]) {
      taken[idx] = 1;
      chosen.push_back(idx);
    }
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<CrossObservation> raw;
  const int rep_span = config.replicates_max - config.replicates_min + 1;
  for (std::size_t combo : chosen) {
    const int b = static_cast<int>(combo / static_cast<std::size_t>(config.n_testers));
    const int t = static_cast<int>(combo % static_cast<std::size_t>(config.n_testers));
    const int reps = config.replicates_min +
                     static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(rep_span)));
    for (int r = 0; r < reps; ++r) {
      CrossObservation obs;
      obs.inbred = b;
      obs.tester = t;
      obs.location =
          static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config.n_locations)));
      obs.genetic_group = truth.inbred_group[static_cast<std::size_t>(b)];
      obs.year = 2010 + static_cast<int>(rng.uniform_index(6));
      obs.yield =
          truth.true_yield(b, t, obs.location, config.interaction_scale, config.global_mean) +
          rng.gaussian(0.0, config.noise_std);
      raw.push_back(obs);
    }
  }

  // Compact to the entities that actually appear, exactly as a CSV
  // round trip would, and filter the ground truth to the same index space.
  // With a sufficient combination budget the compaction is the identity.
  std::vector<char> seen_b(static_cast<std::size_t>(config.n_inbreds), 0);
  std::vector<char> seen_t(static_cast<std::size_t>(config.n_testers), 0);
  std::vector<char> seen_l(static_cast<std::size_t>(config.n_locations), 0);
  std::vector<char> seen_g(static_cast<std::size_t>(config.n_groups), 0);
  for (const auto& o : raw) {
    seen_b[static_cast<std::size_t>(o.inbred)] = 1;
    seen_t[static_cast<std::size_t>(o.tester)] = 1;
    seen_l[static_cast<std::size_t>(o.location)] = 1;
    seen_g[static_cast<std::size_t>(o.genetic_group)] = 1;
  }
  auto build_map = [](const std::vector<char>& seen) {
    std::vector<int> map(seen.size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (seen[i]) map[i] = next++;
    return map;
  };
  const auto b_map = build_map(seen_b);
  const auto t_map = build_map(seen_t);
  const auto l_map = build_map(seen_l);
  const auto g_map = build_map(seen_g);

  Dataset ds;
  for (int i = 0; i < config.n_inbreds; ++i)
    if (b_map[static_cast<std::size_t>(i)] >= 0)
      ds.inbred_ids.push_back(padded_id('B', i, config.n_inbreds));
  for (int i = 0; i < config.n_testers; ++i)
    if (t_map[static_cast<std::size_t>(i)] >= 0)
      ds.tester_ids.push_back(padded_id('T', i, config.n_testers));
  for (int i = 0; i < config.n_locations; ++i)
    if (l_map[static_cast<std::size_t>(i)] >= 0)
      ds.location_ids.push_back(padded_id('L', i, config.n_locations));
  for (int i = 0; i < config.n_groups; ++i)
    if (g_map[static_cast<std::size_t>(i)] >= 0)
      ds.group_ids.push_back(padded_id('G', i, config.n_groups));
  ds.n_inbreds = static_cast<int>(ds.inbred_ids.size());
  ds.n_testers = static_cast<int>(ds.tester_ids.size());
  ds.n_locations = static_cast<int>(ds.location_ids.size());
  ds.n_groups = static_cast<int>(ds.group_ids.size());

  ds.observations.reserve(raw.size());
  for (auto o : raw) {
    o.inbred = b_map[static_cast<std::size_t>(o.inbred)];
    o.tester = t_map[static_cast<std::size_t>(o.tester)];
    o.location = l_map[static_cast<std::size_t>(o.location)];
    o.genetic_group = g_map[static_cast<std::size_t>(o.genetic_group)];
    ds.observations.push_back(o);
  }
  ds.resolve_modal_groups();

  GroundTruth kept;
  kept.noise_std = truth.noise_std;
  kept.inbred_factors = Matrix(static_cast<std::size_t>(ds.n_inbreds),
                               static_cast<std::size_t>(config.latent_rank));
  kept.inbred_group.resize(static_cast<std::size_t>(ds.n_inbreds));
  for (int i = 0; i < config.n_inbreds; ++i) {
    int ni = b_map[static_cast<std::size_t>(i)];
    if (ni < 0) continue;
    auto src = truth.inbred_factors.row(static_cast<std::size_t>(i));
    std::copy(src.begin(), src.end(), kept.inbred_factors.row(static_cast<std::size_t>(ni)).begin());
    kept.inbred_group[static_cast<std::size_t>(ni)] =
        g_map[static_cast<std::size_t>(truth.inbred_group[static_cast<std::size_t>(i)])];
  }
  kept.tester_factors = Matrix(static_cast<std::size_t>(ds.n_testers),
                               static_cast<std::size_t>(config.latent_rank));
  kept.tester_group.resize(static_cast<std::size_t>(ds.n_testers));
  for (int i = 0; i < config.n_testers; ++i) {
    int ni = t_map[static_cast<std::size_t>(i)];
    if (ni < 0) continue;
    auto src = truth.tester_factors.row(static_cast<std::size_t>(i));
    std::copy(src.begin(), src.end(), kept.tester_factors.row(static_cast<std::size_t>(ni)).begin());
    // A tester's group can be absent from the data (groups enter the schema
    // only through inbreds); those map to -1.
    kept.tester_group[static_cast<std::size_t>(ni)] =
        g_map[static_cast<std::size_t>(truth.tester_group[static_cast<std::size_t>(i)])];
  }
  for (int i = 0; i < config.n_locations; ++i)
    if (l_map[static_cast<std::size_t>(i)] >= 0)
      kept.location_effects.push_back(truth.location_effects[static_cast<std::size_t>(i)]);
  for (int i = 0; i < config.n_groups; ++i)
    if (g_map[static_cast<std::size_t>(i)] >= 0)
      kept.group_effects.push_back(truth.group_effects[static_cast<std::size_t>(i)]);

  return {std::move(ds), std::move(kept)};
}

}  // namespace crossyield
