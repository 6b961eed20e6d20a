// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "crossyield/fm.hpp"
#include "crossyield/lasso.hpp"
#include "crossyield/matrix.hpp"
#include "crossyield/model.hpp"
#include "crossyield/synthetic.hpp"

namespace crossyield {

/// One text container for every parameter family (network variants,
/// baselines, ground truth). Layout:
///
///   crossyield-snapshot v1
///   kind <tag>
///   meta <key> <value...>        (0+ lines)
///   tensor <name> <rows> <cols>  (0+ blocks)
///   <rows lines of cols values>
///   end
///
/// Values are shortest-round-trip decimals, so save/load is bit-exact.
struct Snapshot {
  std::string kind;
  std::map<std::string, std::string> meta;
  struct Entry {
    std::string name;
    Matrix values;
  };
  std::vector<Entry> tensors;

  const Matrix& require(const std::string& name) const;
  bool has(const std::string& name) const;

  int meta_int(const std::string& key) const;
  double meta_double(const std::string& key) const;
  std::vector<int> meta_ints(const std::string& key) const;
};

void save_snapshot(const Snapshot& snap, const std::string& path);
Snapshot load_snapshot(const std::string& path);

/// Network parameter adapters; load validates shapes and finiteness.
Snapshot snapshot_of(const ModelParams& params);
ModelParams model_from_snapshot(const Snapshot& snap);

/// Baseline adapters, kinds "fm" and "deepfm".
Snapshot snapshot_of(const FMParams& params);
FMParams fm_from_snapshot(const Snapshot& snap);
Snapshot snapshot_of(const DeepFMParams& params);
DeepFMParams deepfm_from_snapshot(const Snapshot& snap);

/// Linear baseline, kind "lasso".
Snapshot snapshot_of(const LassoParams& params);
LassoParams lasso_from_snapshot(const Snapshot& snap);

/// Generator ground truth, kind "ground-truth".
Snapshot snapshot_of(const GroundTruth& truth);
GroundTruth ground_truth_from_snapshot(const Snapshot& snap);

}  // namespace crossyield
