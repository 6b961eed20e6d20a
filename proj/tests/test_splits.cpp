// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "crossyield/splits.hpp"
#include "crossyield/synthetic.hpp"

using namespace crossyield;

namespace {

Dataset dummy_dataset(std::size_t n_obs) {
  Dataset ds;
  ds.n_inbreds = 1;
  ds.n_testers = 1;
  ds.n_locations = 1;
  ds.n_groups = 1;
  ds.inbred_ids = {"B1"};
  ds.tester_ids = {"T1"};
  ds.location_ids = {"L1"};
  ds.group_ids = {"G1"};
  ds.observations.resize(n_obs);
  ds.inbred_modal_group = {0};
  return ds;
}

}  // namespace

TEST_SUITE("splits") {

TEST_CASE("kfold folds partition the observations with near-equal sizes") {
  Dataset ds = dummy_dataset(103);
  SplitPlan plan = kfold_split(ds, 5, 42);
  REQUIRE(plan.folds.size() == 5);

  std::vector<std::size_t> all;
  for (const auto& fold : plan.folds) {
    CHECK(std::is_sorted(fold.begin(), fold.end()));
    CHECK(fold.size() >= 20);
    CHECK(fold.size() <= 21);
    all.insert(all.end(), fold.begin(), fold.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> want(103);
  std::iota(want.begin(), want.end(), std::size_t{0});
  CHECK(all == want);
}

TEST_CASE("kfold at full scale gives the expected fold sizes") {
  Dataset ds = dummy_dataset(199476);
  SplitPlan plan = kfold_split(ds, 10, 1);
  std::multiset<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto& fold : plan.folds) {
    sizes.insert(fold.size());
    total += fold.size();
  }
  CHECK(total == 199476);
  // 199476 = 10 * 19947 + 6: six folds of 19948 and four of 19947.
  CHECK(sizes.count(19948) == 6);
  CHECK(sizes.count(19947) == 4);
}

TEST_CASE("kfold is deterministic in the seed and varies across seeds") {
  Dataset ds = dummy_dataset(64);
  SplitPlan a = kfold_split(ds, 4, 7);
  SplitPlan b = kfold_split(ds, 4, 7);
  SplitPlan c = kfold_split(ds, 4, 8);
  CHECK(a.folds == b.folds);
  CHECK(a.folds != c.folds);
}

TEST_CASE("kfold rejects out-of-range k") {
  Dataset ds = dummy_dataset(10);
  CHECK_THROWS_AS(kfold_split(ds, 1, 0), InputError);
  CHECK_THROWS_AS(kfold_split(ds, 11, 0), InputError);
  CHECK_NOTHROW(kfold_split(ds, 10, 0));
}

TEST_CASE("holdout removes every record of each held combination") {
  auto [ds, truth] = generate_synthetic(SyntheticConfig::desk_scale(5));
  const std::size_t n_held = 30;
  SplitPlan plan = holdout_split(ds, n_held, 99);
  REQUIRE(plan.held.size() == n_held);

  std::set<std::pair<int, int>> held_pairs;
  for (const auto& h : plan.held) held_pairs.insert({h.inbred, h.tester});
  CHECK(held_pairs.size() == n_held);  // all distinct

  std::size_t held_records = 0;
  for (const auto& h : plan.held) held_records += h.record_count;
  CHECK(plan.train_indices.size() + held_records == ds.size());

  for (std::size_t i : plan.train_indices) {
    const auto& o = ds.observations[i];
    CHECK_FALSE(held_pairs.contains({o.inbred, o.tester}));
  }
  CHECK(std::is_sorted(plan.train_indices.begin(), plan.train_indices.end()));
}

TEST_CASE("holdout mean yields match a direct scan") {
  auto [ds, truth] = generate_synthetic(SyntheticConfig::desk_scale(6));
  SplitPlan plan = holdout_split(ds, 20, 3);

  for (const auto& h : plan.held) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& o : ds.observations) {
      if (o.inbred == h.inbred && o.tester == h.tester) {
        sum += o.yield;
        ++count;
      }
    }
    REQUIRE(count == h.record_count);
    CHECK(h.mean_yield == doctest::Approx(sum / static_cast<double>(count)).epsilon(1e-12));
  }
}

TEST_CASE("holdout is deterministic and rejects holding everything") {
  auto [ds, truth] = generate_synthetic(SyntheticConfig::desk_scale(7));
  SplitPlan a = holdout_split(ds, 10, 4);
  SplitPlan b = holdout_split(ds, 10, 4);
  CHECK(a.train_indices == b.train_indices);
  REQUIRE(a.held.size() == b.held.size());
  for (std::size_t i = 0; i < a.held.size(); ++i) {
    CHECK(a.held[i].inbred == b.held[i].inbred);
    CHECK(a.held[i].tester == b.held[i].tester);
  }

  const std::size_t tested = ds.tested_combination_count();
  CHECK_THROWS_AS(holdout_split(ds, tested, 1), InputError);
  CHECK_NOTHROW(holdout_split(ds, tested - 1, 1));
}

}  // TEST_SUITE
