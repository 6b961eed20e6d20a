// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "crossyield/dataset.hpp"
#include "crossyield/matrix.hpp"
#include "crossyield/model.hpp"

namespace crossyield {

enum class ParentKind { inbreds, testers };
enum class Tercile { low, medium, high };
enum class LatentComponent { gmf, nn };

std::string to_string(ParentKind which);
std::string to_string(Tercile tercile);
std::string to_string(LatentComponent component);
ParentKind parent_kind_from_string(const std::string& name);
LatentComponent latent_component_from_string(const std::string& name);

/// Location-averaged predicted yield for every (inbred, tester) pair, with
/// the id maps needed to label exports.
struct PredictionMatrix {
  Matrix cells;  // n_inbreds x n_testers
  std::vector<std::string> inbred_ids;
  std::vector<std::string> tester_ids;
};

/// Fills the full grid: cell (b, t) is the mean over every location index
/// of the infer-mode prediction at (b, t, modal group of b, l). Parameter
/// dims must match the dataset. Cells are independent, so extra threads
/// split the rows without changing a single bit of the result.
PredictionMatrix predict_full_matrix(const ModelParams& params, const Dataset& ds,
                                     int threads = 1);

/// One parent's observed marginal yield and its rank tercile.
struct ParentCategory {
  int index = 0;
  std::string id;
  double marginal_mean = 0.0;
  Tercile tercile = Tercile::low;
};

/// Categorized parents in index order plus the parents that could not be
/// ranked because they have no observations.
struct CategorizedParents {
  std::vector<ParentCategory> categories;
  std::vector<int> excluded;
};

/// Ranks parents of one side by marginal mean yield into low/medium/high
/// terciles. Ties break toward the lower parent index; when the count is
/// not divisible by three the lower terciles take the extra parents, so
/// sizes differ by at most one.
CategorizedParents categorize_parents(const Dataset& ds, ParentKind which);

/// Embedding rows selected for export, labeled with yield terciles.
struct LatentExport {
  std::vector<std::string> parent_ids;
  std::vector<std::string> labels;
  Matrix rows;  // selection x embedding width
};

/// Pulls the chosen embedding table's rows for the selected parent ids
/// (empty selection = every parent with observations). Ids must exist and
/// have at least one observation; the component must exist on the model
/// kind. Row values are exactly the table rows.
LatentExport collect_latents(const ModelParams& params, const Dataset& ds, ParentKind which,
                             LatentComponent component,
                             const std::vector<std::string>& selected);

/// CSV `parent_id,label,dim_0..dim_{k-1}`.
void write_latents_csv(const LatentExport& latents, const std::string& path);

/// CSV `parent_id,label,x,y` pairing the export's labels with a 2-D
/// embedding (one row per exported parent).
void write_tsne_csv(const LatentExport& latents, const Matrix& embedding,
                    const std::string& path);

/// CSV grid: tester ids as header, inbred ids as first column, prediction
/// cells, and a trailing per-row best-tester column (argmax over the
/// selected testers, ties toward the earlier column). Empty subsets select
/// the full range.
void export_heatmap(const PredictionMatrix& matrix, const std::vector<int>& inbred_subset,
                    const std::vector<int>& tester_subset, const std::string& path);

}  // namespace crossyield
