// SPDX-License-Identifier: Apache-2.0
#include "crossyield/analyze.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>
#include <utility>

namespace crossyield {

std::string to_string(ParentKind which) {
  return which == ParentKind::inbreds ? "inbreds" : "testers";
}

std::string to_string(Tercile tercile) {
  switch (tercile) {
    case Tercile::low: return "low";
    case Tercile::medium: return "medium";
    case Tercile::high: return "high";
  }
  throw InputError("to_string: unknown tercile");
}

std::string to_string(LatentComponent component) {
  return component == LatentComponent::gmf ? "gmf" : "nn";
}

ParentKind parent_kind_from_string(const std::string& name) {
  if (name == "inbreds") return ParentKind::inbreds;
  if (name == "testers") return ParentKind::testers;
  throw InputError("parent_kind_from_string: unknown kind `" + name + "`");
}

LatentComponent latent_component_from_string(const std::string& name) {
  if (name == "gmf") return LatentComponent::gmf;
  if (name == "nn") return LatentComponent::nn;
  throw InputError("latent_component_from_string: unknown component `" + name + "`");
}

PredictionMatrix predict_full_matrix(const ModelParams& params, const Dataset& ds, int threads) {
  if (params.n_inbreds != ds.n_inbreds || params.n_testers != ds.n_testers ||
      params.n_groups != ds.n_groups || params.n_locations != ds.n_locations) {
    throw InputError("predict_full_matrix: parameter dims do not match dataset");
  }
  if (ds.inbred_modal_group.size() != static_cast<std::size_t>(ds.n_inbreds)) {
    throw InputError("predict_full_matrix: dataset has no modal group map");
  }
  if (threads < 1) throw InputError("predict_full_matrix: threads must be >= 1");

  PredictionMatrix out;
  out.inbred_ids = ds.inbred_ids;
  out.tester_ids = ds.tester_ids;
  out.cells = Matrix(static_cast<std::size_t>(ds.n_inbreds),
                     static_cast<std::size_t>(ds.n_testers));

  // Cells are independent, so row blocks can run on separate threads and
  // the result is identical for every thread count.
  auto fill_rows = [&](int b_begin, int b_end) {
    CrossObservation probe;
    probe.year = 0;
    probe.yield = 0.0;
    const double n_l = static_cast<double>(ds.n_locations);
    for (int b = b_begin; b < b_end; ++b) {
      probe.inbred = b;
      probe.genetic_group = ds.inbred_modal_group[static_cast<std::size_t>(b)];
      for (int t = 0; t < ds.n_testers; ++t) {
        probe.tester = t;
        double sum = 0.0;
        for (int l = 0; l < ds.n_locations; ++l) {
          probe.location = l;
          sum += predict(params, probe);
        }
        out.cells(static_cast<std::size_t>(b), static_cast<std::size_t>(t)) = sum / n_l;
      }
    }
  };

  const int workers = std::min(threads, ds.n_inbreds);
  if (workers <= 1) {
    fill_rows(0, ds.n_inbreds);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const int per = (ds.n_inbreds + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * per;
      const int end = std::min(ds.n_inbreds, begin + per);
      pool.emplace_back([&, w, begin, end] {
        try {
          fill_rows(begin, end);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& worker : pool) worker.join();
    for (const auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
  }
  if (!out.cells.all_finite()) {
    throw InputError("predict_full_matrix: non-finite prediction cell");
  }
  return out;
}

CategorizedParents categorize_parents(const Dataset& ds, ParentKind which) {
  if (ds.observations.empty()) throw InputError("categorize_parents: empty dataset");
  const bool inbreds = which == ParentKind::inbreds;
  const int n = inbreds ? ds.n_inbreds : ds.n_testers;
  const auto& ids = inbreds ? ds.inbred_ids : ds.tester_ids;

  std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n), 0);
  for (const auto& o : ds.observations) {
    const auto p = static_cast<std::size_t>(inbreds ? o.inbred : o.tester);
    sum[p] += o.yield;
    count[p] += 1;
  }

  CategorizedParents out;
  std::vector<int> ranked;
  for (int p = 0; p < n; ++p) {
    if (count[static_cast<std::size_t>(p)] == 0) {
      out.excluded.push_back(p);
    } else {
      ranked.push_back(p);
    }
  }
  auto mean_of = [&](int p) {
    const auto i = static_cast<std::size_t>(p);
    return sum[i] / static_cast<double>(count[i]);
  };
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    if (ma != mb) return ma < mb;
    return a < b;
  });

  // Contiguous rank blocks; remainders widen the lower terciles first.
  const std::size_t m = ranked.size();
  const std::size_t base = m / 3;
  const std::size_t rem = m % 3;
  const std::size_t low_end = base + (rem > 0 ? 1 : 0);
  const std::size_t medium_end = low_end + base + (rem > 1 ? 1 : 0);

  std::vector<ParentCategory> by_rank(m);
  for (std::size_t r = 0; r < m; ++r) {
    ParentCategory cat;
    cat.index = ranked[r];
    cat.id = ids[static_cast<std::size_t>(ranked[r])];
    cat.marginal_mean = mean_of(ranked[r]);
    cat.tercile = r < low_end ? Tercile::low : r < medium_end ? Tercile::medium : Tercile::high;
    by_rank[r] = std::move(cat);
  }
  std::sort(by_rank.begin(), by_rank.end(),
            [](const ParentCategory& a, const ParentCategory& b) { return a.index < b.index; });
  out.categories = std::move(by_rank);
  return out;
}

LatentExport collect_latents(const ModelParams& params, const Dataset& ds, ParentKind which,
                             LatentComponent component,
                             const std::vector<std::string>& selected) {
  const bool inbreds = which == ParentKind::inbreds;
  if (params.n_inbreds != ds.n_inbreds || params.n_testers != ds.n_testers) {
    throw InputError("collect_latents: parameter dims do not match dataset");
  }
  const Matrix& table =
      inbreds ? (component == LatentComponent::gmf ? params.gmf_inbred_embed
                                                   : params.nn_inbred_embed)
              : (component == LatentComponent::gmf ? params.gmf_tester_embed
                                                   : params.nn_tester_embed);
  if (table.empty()) {
    throw InputError("collect_latents: model kind `" + to_string(params.kind) + "` has no " +
                     to_string(component) + " " + to_string(which) + " table");
  }

  const auto& ids = inbreds ? ds.inbred_ids : ds.tester_ids;
  CategorizedParents ranked = categorize_parents(ds, which);
  std::map<int, const ParentCategory*> by_index;
  for (const auto& cat : ranked.categories) by_index[cat.index] = &cat;

  std::vector<int> indices;
  if (selected.empty()) {
    for (const auto& cat : ranked.categories) indices.push_back(cat.index);
  } else {
    std::map<std::string, int> index_of;
    for (std::size_t i = 0; i < ids.size(); ++i) index_of[ids[i]] = static_cast<int>(i);
    for (const auto& id : selected) {
      auto it = index_of.find(id);
      if (it == index_of.end()) {
        throw InputError("collect_latents: unknown " + to_string(which) + " id `" + id + "`");
      }
      if (!by_index.contains(it->second)) {
        throw InputError("collect_latents: " + to_string(which) + " id `" + id +
                         "` has no observations");
      }
      indices.push_back(it->second);
    }
  }

  LatentExport out;
  out.rows = Matrix(indices.size(), table.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Vec row = embed_lookup(table, indices[r]);
    for (std::size_t c = 0; c < table.cols(); ++c) out.rows(r, c) = row[c];
    out.parent_ids.push_back(ids[static_cast<std::size_t>(indices[r])]);
    out.labels.push_back(to_string(by_index.at(indices[r])->tercile));
  }
  return out;
}

void write_latents_csv(const LatentExport& latents, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("write_latents_csv: cannot open " + path + " for writing");
  out << "parent_id,label";
  for (std::size_t c = 0; c < latents.rows.cols(); ++c) out << ",dim_" << c;
  out << '\n';
  for (std::size_t r = 0; r < latents.rows.rows(); ++r) {
    out << latents.parent_ids[r] << ',' << latents.labels[r];
    for (std::size_t c = 0; c < latents.rows.cols(); ++c) {
      out << ',' << format_double(latents.rows(r, c));
    }
    out << '\n';
  }
  if (!out.flush()) throw InputError("write_latents_csv: write failed for " + path);
}

void write_tsne_csv(const LatentExport& latents, const Matrix& embedding,
                    const std::string& path) {
  if (embedding.rows() != latents.parent_ids.size() || embedding.cols() != 2) {
    detail::shape_fail("write_tsne_csv",
                       "embedding must be " + std::to_string(latents.parent_ids.size()) +
                           "x2, got " + detail::shape_str(embedding.rows(), embedding.cols()));
  }
  std::ofstream out(path);
  if (!out) throw InputError("write_tsne_csv: cannot open " + path + " for writing");
  out << "parent_id,label,x,y\n";
  for (std::size_t r = 0; r < embedding.rows(); ++r) {
    out << latents.parent_ids[r] << ',' << latents.labels[r] << ','
        << format_double(embedding(r, 0)) << ',' << format_double(embedding(r, 1)) << '\n';
  }
  if (!out.flush()) throw InputError("write_tsne_csv: write failed for " + path);
}

void export_heatmap(const PredictionMatrix& matrix, const std::vector<int>& inbred_subset,
                    const std::vector<int>& tester_subset, const std::string& path) {
  const int n_b = static_cast<int>(matrix.cells.rows());
  const int n_t = static_cast<int>(matrix.cells.cols());
  std::vector<int> rows = inbred_subset;
  std::vector<int> cols = tester_subset;
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(n_b));
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (cols.empty()) {
    cols.resize(static_cast<std::size_t>(n_t));
    std::iota(cols.begin(), cols.end(), 0);
  }
  for (int b : rows) {
    if (b < 0 || b >= n_b) {
      throw InputError("export_heatmap: inbred index " + std::to_string(b) + " out of range");
    }
  }
  for (int t : cols) {
    if (t < 0 || t >= n_t) {
      throw InputError("export_heatmap: tester index " + std::to_string(t) + " out of range");
    }
  }

  std::ofstream out(path);
  if (!out) throw InputError("export_heatmap: cannot open " + path + " for writing");
  out << "inbred";
  for (int t : cols) out << ',' << matrix.tester_ids[static_cast<std::size_t>(t)];
  out << ",best_tester\n";
  for (int b : rows) {
    out << matrix.inbred_ids[static_cast<std::size_t>(b)];
    std::size_t best = 0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v =
          matrix.cells(static_cast<std::size_t>(b), static_cast<std::size_t>(cols[c]));
      out << ',' << format_double(v);
      if (v > matrix.cells(static_cast<std::size_t>(b), static_cast<std::size_t>(cols[best]))) {
        best = c;
      }
    }
    out << ',' << matrix.tester_ids[static_cast<std::size_t>(cols[best])] << '\n';
  }
  if (!out.flush()) throw InputError("export_heatmap: write failed for " + path);
}

}  // namespace crossyield
