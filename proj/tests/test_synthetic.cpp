// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "crossyield/dataset.hpp"
#include "crossyield/synthetic.hpp"
#include "support/test_util.hpp"

using namespace crossyield;

TEST_SUITE("synthetic") {

TEST_CASE("generation is deterministic in the seed") {
  auto [ds1, t1] = generate_synthetic(SyntheticConfig::desk_scale(3));
  auto [ds2, t2] = generate_synthetic(SyntheticConfig::desk_scale(3));
  REQUIRE(ds1.size() == ds2.size());
  for (std::size_t i = 0; i < ds1.size(); ++i) {
    CHECK(ds1.observations[i].inbred == ds2.observations[i].inbred);
    CHECK(ds1.observations[i].yield == ds2.observations[i].yield);
  }
  CHECK(t1.inbred_factors == t2.inbred_factors);
  CHECK(t1.tester_factors == t2.tester_factors);

  auto [ds3, t3] = generate_synthetic(SyntheticConfig::desk_scale(4));
  CHECK(t1.inbred_factors != t3.inbred_factors);
}

TEST_CASE("IDs are zero-padded so index order equals id order") {
  auto cfg = SyntheticConfig::desk_scale(1);
  auto [ds, truth] = generate_synthetic(cfg);
  REQUIRE(static_cast<int>(ds.inbred_ids.size()) == cfg.n_inbreds);
  CHECK(ds.inbred_ids.front() == "B01");
  CHECK(ds.inbred_ids.back() == "B60");
  CHECK(std::is_sorted(ds.inbred_ids.begin(), ds.inbred_ids.end()));
  CHECK(ds.tester_ids.front() == "T01");
  CHECK(ds.location_ids.front() == "L01");
  CHECK(ds.group_ids == std::vector<std::string>{"G1", "G2", "G3", "G4", "G5"});
}

TEST_CASE("structure matches the config") {
  auto cfg = SyntheticConfig::desk_scale(2);
  auto [ds, truth] = generate_synthetic(cfg);

  const std::size_t total =
      static_cast<std::size_t>(cfg.n_inbreds) * static_cast<std::size_t>(cfg.n_testers);
  const auto want_combos =
      static_cast<std::size_t>(std::llround(cfg.observed_combo_fraction * total));
  CHECK(ds.tested_combination_count() == want_combos);

  std::map<std::pair<int, int>, std::size_t> reps;
  for (const auto& o : ds.observations) {
    reps[{o.inbred, o.tester}]++;
    CHECK(o.location >= 0);
    CHECK(o.location < cfg.n_locations);
    CHECK(o.genetic_group == truth.inbred_group[static_cast<std::size_t>(o.inbred)]);
    CHECK(o.year >= 2010);
    CHECK(o.year <= 2015);
  }
  for (const auto& [bt, count] : reps) {
    CHECK(count >= static_cast<std::size_t>(cfg.replicates_min));
    CHECK(count <= static_cast<std::size_t>(cfg.replicates_max));
  }
  CHECK(ds.inbred_modal_group == truth.inbred_group);
  CHECK(truth.inbred_factors.rows() == static_cast<std::size_t>(cfg.n_inbreds));
  CHECK(truth.inbred_factors.cols() == static_cast<std::size_t>(cfg.latent_rank));
  CHECK(truth.tester_factors.rows() == static_cast<std::size_t>(cfg.n_testers));
}

TEST_CASE("with zero noise each yield equals the planted model exactly") {
  auto cfg = SyntheticConfig::desk_scale(11);
  cfg.noise_std = 0.0;
  auto [ds, truth] = generate_synthetic(cfg);
  for (const auto& o : ds.observations) {
    double want =
        truth.true_yield(o.inbred, o.tester, o.location, cfg.interaction_scale, cfg.global_mean);
    CHECK(o.yield == want);
  }
}

TEST_CASE("tester_factor_mean shifts the tester factors") {
  auto cfg = SyntheticConfig::desk_scale(12);
  cfg.tester_factor_mean = 0.5;
  auto [ds, truth] = generate_synthetic(cfg);
  double sum = 0.0;
  for (double v : truth.tester_factors.flat()) sum += v;
  double mean = sum / static_cast<double>(truth.tester_factors.size());
  // 400 draws, std 1: the sample mean should sit within ~5 sigma of 0.5.
  CHECK(std::abs(mean - 0.5) < 0.25);
}

TEST_CASE("paper scale reproduces the target census") {
  auto [ds, truth] = generate_synthetic(SyntheticConfig::paper_scale(1));
  CensusSummary s = census(ds);
  CHECK(s.n_inbreds == 593);
  CHECK(s.n_testers == 496);
  CHECK(s.n_locations == 280);
  CHECK(s.n_groups == 14);
  CHECK(s.tested_fraction == doctest::Approx(0.0371).epsilon(0.01));
  // ~10912 combos x ~18.5 replicates.
  CHECK(s.observation_count > 190000);
  CHECK(s.observation_count < 215000);
  CHECK(s.yield_mean == doctest::Approx(1.002).epsilon(0.01));
  CHECK(s.yield_std == doctest::Approx(0.1047).epsilon(0.02));
}

TEST_CASE("a generated dataset survives a CSV round trip unchanged") {
  auto dir = testutil::scratch_dir("synthetic_roundtrip");
  auto path = (dir / "gen.csv").string();
  auto [ds, truth] = generate_synthetic(SyntheticConfig::desk_scale(21));
  write_csv(ds, path);
  Dataset back = load_csv(path);

  CHECK(back.inbred_ids == ds.inbred_ids);
  CHECK(back.tester_ids == ds.tester_ids);
  CHECK(back.location_ids == ds.location_ids);
  CHECK(back.group_ids == ds.group_ids);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.observations[i].inbred == ds.observations[i].inbred);
    CHECK(back.observations[i].tester == ds.observations[i].tester);
    CHECK(back.observations[i].location == ds.observations[i].location);
    CHECK(back.observations[i].genetic_group == ds.observations[i].genetic_group);
    CHECK(back.observations[i].yield == ds.observations[i].yield);
  }
  CHECK(back.inbred_modal_group == ds.inbred_modal_group);
}

TEST_CASE("a starved combination budget still yields an aligned ground truth") {
  auto cfg = SyntheticConfig::desk_scale(31);
  cfg.observed_combo_fraction = 0.004;  // 12 combos for 60 inbreds: cannot cover
  auto [ds, truth] = generate_synthetic(cfg);
  CHECK(ds.n_inbreds < cfg.n_inbreds);
  CHECK(static_cast<std::size_t>(ds.n_inbreds) == truth.inbred_factors.rows());
  CHECK(static_cast<std::size_t>(ds.n_testers) == truth.tester_factors.rows());
  CHECK(truth.inbred_group.size() == static_cast<std::size_t>(ds.n_inbreds));
  CHECK(truth.location_effects.size() == static_cast<std::size_t>(ds.n_locations));
  CHECK(truth.group_effects.size() == static_cast<std::size_t>(ds.n_groups));
  // Planted model still reproduces noiseless yields after compaction.
  cfg.noise_std = 0.0;
  auto [ds0, truth0] = generate_synthetic(cfg);
  for (const auto& o : ds0.observations) {
    double want =
        truth0.true_yield(o.inbred, o.tester, o.location, cfg.interaction_scale, cfg.global_mean);
    CHECK(o.yield == want);
  }
}

TEST_CASE("config validation rejects nonsense") {
  auto bad = SyntheticConfig::desk_scale(1);
  bad.n_inbreds = 0;
  CHECK_THROWS_AS(generate_synthetic(bad), InputError);
  bad = SyntheticConfig::desk_scale(1);
  bad.observed_combo_fraction = 0.0;
  CHECK_THROWS_AS(generate_synthetic(bad), InputError);
  bad = SyntheticConfig::desk_scale(1);
  bad.replicates_max = bad.replicates_min - 1;
  CHECK_THROWS_AS(generate_synthetic(bad), InputError);
  bad = SyntheticConfig::desk_scale(1);
  bad.noise_std = -0.1;
  CHECK_THROWS_AS(generate_synthetic(bad), InputError);
}

}  // TEST_SUITE
