// SPDX-License-Identifier: Apache-2.0
#include "crossyield/splits.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "crossyield/rng.hpp"

namespace crossyield {

SplitPlan kfold_split(const Dataset& ds, int k, std::uint64_t seed) {
  const std::size_t n = ds.observations.size();
  if (k < 2) throw InputError("kfold_split: k must be >= 2, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) > n) {
    throw InputError("kfold_split: k=" + std::to_string(k) + " exceeds observation count " +
                     std::to_string(n));
  }
  Rng rng(seed);
  auto perm = rng.permutation(n);

  SplitPlan plan;
  plan.kind = SplitPlan::Kind::kfold;
  plan.folds.resize(k);
  // Round-robin over the shuffled order: fold sizes differ by at most 1.
  for (std::size_t i = 0; i < n; ++i) {
    plan.folds[i % static_cast<std::size_t>(k)].push_back(perm[i]);
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

SplitPlan holdout_split(const Dataset& ds, std::size_t n_combos, std::uint64_t seed) {
  // Gather the tested combinations in deterministic (inbred, tester) order,
  // with their observed means.
  std::map<std::pair<int, int>, std::pair<double, std::size_t>> combo_stats;
  for (const auto& o : ds.observations) {
    auto& [sum, count] = combo_stats[{o.inbred, o.tester}];
    sum += o.yield;
    count += 1;
  }
  if (n_combos >= combo_stats.size()) {
    throw InputError("holdout_split: n_combos=" + std::to_string(n_combos) +
                     " must be below the tested combination count " +
                     std::to_string(combo_stats.size()));
  }

  std::vector<std::pair<int, int>> combos;
  combos.reserve(combo_stats.size());
  for (const auto& [bt, _] : combo_stats) combos.push_back(bt);

  Rng rng(seed);
  rng.shuffle(combos);

  SplitPlan plan;
  plan.kind = SplitPlan::Kind::holdout;
  std::set<std::pair<int, int>> held_set(combos.begin(), combos.begin() + n_combos);
  plan.held.reserve(n_combos);
  for (auto it = combos.begin(); it != combos.begin() + static_cast<std::ptrdiff_t>(n_combos);
       ++it) {
    const auto& [sum, count] = combo_stats.at(*it);
    plan.held.push_back({it->first, it->second, sum / static_cast<double>(count), count});
  }
  for (std::size_t i = 0; i < ds.observations.size(); ++i) {
    const auto& o = ds.observations[i];
    if (!held_set.contains({o.inbred, o.tester})) plan.train_indices.push_back(i);
  }
  return plan;
}

}  // namespace crossyield
