// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "crossyield/dataset.hpp"

namespace crossyield {

/// The two test protocols. Cross validation splits *observations* (each
/// observation lands in exactly one fold); hold-out splits *combinations*
/// (every observation of a held (inbred, tester) pair leaves the training
/// set, and the held response is the pair's mean observed yield across its
/// planted locations). The combination-averaged response is why hold-out
/// accuracies run higher than CV accuracies on the same data.
struct SplitPlan {
  enum class Kind { kfold, holdout };

  struct HeldCombo {
    int inbred = 0;
    int tester = 0;
    double mean_yield = 0.0;  // mean observed yield over the combo's records
    std::size_t record_count = 0;
  };

  Kind kind = Kind::kfold;

  // kfold: observation indices per fold; sizes differ by at most 1.
  std::vector<std::vector<std::size_t>> folds;

  // holdout
  std::vector<HeldCombo> held;
  std::vector<std::size_t> train_indices;
};

/// Random observation-level partition into k folds.
SplitPlan kfold_split(const Dataset& ds, int k, std::uint64_t seed);

/// Holds out n_combos distinct tested (inbred, tester) pairs.
SplitPlan holdout_split(const Dataset& ds, std::size_t n_combos, std::uint64_t seed);

}  // namespace crossyield
