// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "crossyield/common.hpp"

namespace crossyield {

/// One yield record. Indices are dense re-encodings of the original string
/// IDs. `year` is carried through the schema but never fed to any model.
struct CrossObservation {
  int inbred = 0;
  int tester = 0;
  int location = 0;
  int genetic_group = 0;
  int year = 0;
  double yield = 0.0;
};

/// Immutable after load/generation; safe to share read-only across threads.
///
/// Index assignment is lexicographic over the original string IDs, so
/// re-loading the same file always produces identical index maps.
struct Dataset {
  int n_inbreds = 0;
  int n_testers = 0;
  int n_locations = 0;
  int n_groups = 0;

  // index -> original string ID, sorted lexicographically
  std::vector<std::string> inbred_ids;
  std::vector<std::string> tester_ids;
  std::vector<std::string> location_ids;
  std::vector<std::string> group_ids;

  std::vector<CrossObservation> observations;

  /// Most frequent genetic group per inbred over its observations
  /// (ties broken toward the smaller group index). Used when predicting
  /// combinations that were never observed.
  std::vector<int> inbred_modal_group;

  std::size_t size() const { return observations.size(); }

  /// Number of distinct (inbred, tester) pairs with at least one observation.
  std::size_t tested_combination_count() const;

  /// Recompute inbred_modal_group from observations.
  void resolve_modal_groups();
};

/// Header must be exactly `inbred,tester,location,genetic_group,year,yield`.
/// Errors carry the 1-based line number.
Dataset load_csv(const std::string& path);

/// Canonical form: declared column order, `\n` line endings, yields printed
/// as shortest round-trip decimals. write_csv(load_csv(f)) is byte-identical
/// to a canonical f.
void write_csv(const Dataset& ds, const std::string& path);

struct CensusSummary {
  int n_inbreds = 0;
  int n_testers = 0;
  int n_locations = 0;
  int n_groups = 0;
  std::size_t observation_count = 0;
  std::size_t tested_combinations = 0;
  double tested_fraction = 0.0;  // tested_combinations / (n_inbreds * n_testers)
  double yield_mean = 0.0;
  double yield_std = 0.0;  // population (1/n) standard deviation
};

/// Basic structural report. Rejects an empty dataset.
CensusSummary census(const Dataset& ds);

/// Shortest decimal that round-trips to the same double (std::to_chars).
std::string format_double(double v);

}  // namespace crossyield
