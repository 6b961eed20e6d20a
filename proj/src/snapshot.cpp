// SPDX-License-Identifier: Apache-2.0
#include "crossyield/snapshot.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crossyield/dataset.hpp"

namespace crossyield {

namespace {

constexpr const char* kMagic = "crossyield-snapshot v1";

[[noreturn]] void snap_fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw InputError(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_value(const std::string& path, std::size_t line, const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    snap_fail(path, line, "bad numeric value `" + token + "`");
  }
  return v;
}

Matrix column_of(const Vec& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

Vec column_values(const Snapshot& snap, const std::string& name) {
  const Matrix& m = snap.require(name);
  if (m.cols() != 1) {
    throw InputError("snapshot: tensor `" + name + "` should be a column, got " +
                     detail::shape_str(m.rows(), m.cols()));
  }
  Vec v(m.rows());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = m(i, 0);
  return v;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace

const Matrix& Snapshot::require(const std::string& name) const {
  for (const auto& e : tensors) {
    if (e.name == name) return e.values;
  }
  throw InputError("snapshot: missing tensor `" + name + "` in kind `" + kind + "`");
}

bool Snapshot::has(const std::string& name) const {
  for (const auto& e : tensors) {
    if (e.name == name) return true;
  }
  return false;
}

int Snapshot::meta_int(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw InputError("snapshot: missing meta key `" + key + "`");
  return std::stoi(it->second);
}

double Snapshot::meta_double(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw InputError("snapshot: missing meta key `" + key + "`");
  return std::stod(it->second);
}

std::vector<int> Snapshot::meta_ints(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw InputError("snapshot: missing meta key `" + key + "`");
  std::istringstream ss(it->second);
  std::vector<int> out;
  int v;
  while (ss >> v) out.push_back(v);
  return out;
}

void save_snapshot(const Snapshot& snap, const std::string& path) {
  if (snap.kind.empty()) throw InputError("save_snapshot: empty kind tag");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("save_snapshot: cannot open " + path + " for writing");
  out << kMagic << "\n";
  out << "kind " << snap.kind << "\n";
  for (const auto& [key, value] : snap.meta) out << "meta " << key << ' ' << value << "\n";
  for (const auto& e : snap.tensors) {
    if (!e.values.all_finite()) {
      throw InputError("save_snapshot: tensor `" + e.name + "` has non-finite entries");
    }
    out << "tensor " << e.name << ' ' << e.values.rows() << ' ' << e.values.cols() << "\n";
    for (std::size_t r = 0; r < e.values.rows(); ++r) {
      auto row = e.values.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ' ';
        out << format_double(row[c]);
      }
      out << "\n";
    }
  }
  out << "end\n";
  if (!out) throw InputError("save_snapshot: write failed for " + path);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("load_snapshot: cannot open " + path);

  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](bool required) {
    if (!std::getline(in, line)) {
      if (required) snap_fail(path, lineno + 1, "unexpected end of file");
      return false;
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  next_line(true);
  if (line != kMagic) snap_fail(path, lineno, "not a crossyield snapshot (bad magic line)");
  Snapshot snap;
  bool saw_end = false;
  while (next_line(false)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "kind") {
      ss >> snap.kind;
      if (snap.kind.empty()) snap_fail(path, lineno, "kind line without a tag");
    } else if (word == "meta") {
      std::string key;
      ss >> key;
      if (key.empty()) snap_fail(path, lineno, "meta line without a key");
      std::string value;
      std::getline(ss, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      snap.meta[key] = value;
    } else if (word == "tensor") {
      std::string name;
      long long rows = -1, cols = -1;
      ss >> name >> rows >> cols;
      if (name.empty() || rows < 0 || cols < 0 || ss.fail()) {
        snap_fail(path, lineno, "malformed tensor header `" + line + "`");
      }
      Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
      for (long long r = 0; r < rows; ++r) {
        next_line(true);
        std::istringstream row_ss(line);
        std::string token;
        for (long long c = 0; c < cols; ++c) {
          if (!(row_ss >> token)) {
            snap_fail(path, lineno, "tensor `" + name + "` row has fewer than " +
                                        std::to_string(cols) + " values");
          }
          m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
              parse_value(path, lineno, token);
        }
        if (row_ss >> token) {
          snap_fail(path, lineno, "tensor `" + name + "` row has more than " +
                                      std::to_string(cols) + " values");
        }
      }
      if (!m.all_finite()) snap_fail(path, lineno, "tensor `" + name + "` has non-finite entries");
      snap.tensors.push_back({std::move(name), std::move(m)});
    } else if (word == "end") {
      saw_end = true;
      break;
    } else {
      snap_fail(path, lineno, "unknown directive `" + word + "`");
    }
  }
  if (!saw_end) snap_fail(path, lineno, "missing `end` line");
  if (snap.kind.empty()) snap_fail(path, lineno, "missing `kind` line");
  return snap;
}

Snapshot snapshot_of(const ModelParams& params) {
  params.validate();
  Snapshot snap;
  snap.kind = to_string(params.kind);
  snap.meta["n_inbreds"] = std::to_string(params.n_inbreds);
  snap.meta["n_testers"] = std::to_string(params.n_testers);
  snap.meta["n_groups"] = std::to_string(params.n_groups);
  snap.meta["n_locations"] = std::to_string(params.n_locations);
  snap.meta["k1"] = std::to_string(params.hyper.k1);
  snap.meta["k2"] = std::to_string(params.hyper.k2);
  snap.meta["kg"] = std::to_string(params.hyper.kg);
  snap.meta["kl"] = std::to_string(params.hyper.kl);
  {
    std::string widths;
    for (std::size_t i = 0; i < params.hyper.mlp_widths.size(); ++i) {
      if (i) widths += ' ';
      widths += std::to_string(params.hyper.mlp_widths[i]);
    }
    snap.meta["mlp_widths"] = widths;
  }
  snap.meta["keep_prob"] = format_double(params.hyper.keep_prob);
  snap.meta["huber_delta"] = format_double(params.hyper.huber_delta);
  for (const auto& nt : params.tensors()) snap.tensors.push_back({nt.name, *nt.tensor});
  return snap;
}

Snapshot snapshot_of(const FMParams& params) {
  params.validate();
  Snapshot snap;
  snap.kind = "fm";
  snap.meta["n_inbreds"] = std::to_string(params.n_inbreds);
  snap.meta["n_testers"] = std::to_string(params.n_testers);
  snap.meta["n_groups"] = std::to_string(params.n_groups);
  snap.meta["n_locations"] = std::to_string(params.n_locations);
  snap.meta["latent_dim"] = std::to_string(params.latent_dim);
  for (const auto& nt : params.tensors()) snap.tensors.push_back({nt.name, *nt.tensor});
  return snap;
}

FMParams fm_from_snapshot(const Snapshot& snap) {
  if (snap.kind != "fm") throw InputError("snapshot: kind `" + snap.kind + "` is not fm");
  FMParams p;
  p.n_inbreds = snap.meta_int("n_inbreds");
  p.n_testers = snap.meta_int("n_testers");
  p.n_groups = snap.meta_int("n_groups");
  p.n_locations = snap.meta_int("n_locations");
  p.latent_dim = snap.meta_int("latent_dim");
  p.w0 = snap.require("w0");
  p.w = snap.require("w");
  p.V = snap.require("V");
  p.validate();
  return p;
}

Snapshot snapshot_of(const DeepFMParams& params) {
  params.validate();
  Snapshot snap;
  snap.kind = "deepfm";
  snap.meta["n_inbreds"] = std::to_string(params.n_inbreds);
  snap.meta["n_testers"] = std::to_string(params.n_testers);
  snap.meta["n_groups"] = std::to_string(params.n_groups);
  snap.meta["n_locations"] = std::to_string(params.n_locations);
  snap.meta["latent_dim"] = std::to_string(params.latent_dim);
  snap.meta["keep_prob"] = format_double(params.keep_prob);
  snap.meta["deep_layers"] = std::to_string(params.deep.size());
  for (const auto& nt : params.tensors()) snap.tensors.push_back({nt.name, *nt.tensor});
  return snap;
}

DeepFMParams deepfm_from_snapshot(const Snapshot& snap) {
  if (snap.kind != "deepfm")
    throw InputError("snapshot: kind `" + snap.kind + "` is not deepfm");
  DeepFMParams p;
  p.n_inbreds = snap.meta_int("n_inbreds");
  p.n_testers = snap.meta_int("n_testers");
  p.n_groups = snap.meta_int("n_groups");
  p.n_locations = snap.meta_int("n_locations");
  p.latent_dim = snap.meta_int("latent_dim");
  p.keep_prob = snap.meta_double("keep_prob");
  p.w0 = snap.require("w0");
  p.w = snap.require("w");
  p.inbred_embed = snap.require("inbred_embed");
  p.tester_embed = snap.require("tester_embed");
  p.group_embed = snap.require("group_embed");
  p.location_embed = snap.require("location_embed");
  const int layers = snap.meta_int("deep_layers");
  if (layers < 1) throw InputError("snapshot: deepfm needs at least one deep layer");
  p.deep.resize(static_cast<std::size_t>(layers));
  for (int j = 0; j < layers; ++j) {
    p.deep[static_cast<std::size_t>(j)].weight =
        snap.require("deep" + std::to_string(j + 1) + "_weight");
    p.deep[static_cast<std::size_t>(j)].bias =
        snap.require("deep" + std::to_string(j + 1) + "_bias");
  }
  p.deep_out_w = snap.require("deep_out_w");
  p.deep_out_b = snap.require("deep_out_b");
  p.validate();
  return p;
}

Snapshot snapshot_of(const LassoParams& params) {
  if (static_cast<int>(params.coefficients.size()) != params.n_features()) {
    throw InputError("snapshot: lasso coefficient count does not match the feature space");
  }
  Snapshot snap;
  snap.kind = "lasso";
  snap.meta["n_inbreds"] = std::to_string(params.n_inbreds);
  snap.meta["n_testers"] = std::to_string(params.n_testers);
  snap.meta["n_groups"] = std::to_string(params.n_groups);
  snap.meta["n_locations"] = std::to_string(params.n_locations);
  snap.meta["intercept"] = format_double(params.intercept);
  snap.meta["converged"] = params.converged ? "1" : "0";
  snap.meta["sweeps_run"] = std::to_string(params.sweeps_run);
  snap.tensors.push_back({"coefficients", column_of(params.coefficients)});
  snap.tensors.push_back({"objective_history", column_of(params.objective_history)});
  return snap;
}

LassoParams lasso_from_snapshot(const Snapshot& snap) {
  if (snap.kind != "lasso") throw InputError("snapshot: kind `" + snap.kind + "` is not lasso");
  LassoParams p;
  p.n_inbreds = snap.meta_int("n_inbreds");
  p.n_testers = snap.meta_int("n_testers");
  p.n_groups = snap.meta_int("n_groups");
  p.n_locations = snap.meta_int("n_locations");
  p.intercept = snap.meta_double("intercept");
  p.converged = snap.meta_int("converged") != 0;
  p.sweeps_run = snap.meta_int("sweeps_run");
  p.coefficients = column_values(snap, "coefficients");
  p.objective_history = column_values(snap, "objective_history");
  if (p.n_inbreds < 1 || p.n_testers < 1 || p.n_groups < 1 || p.n_locations < 1) {
    throw InputError("snapshot: lasso dims must be positive");
  }
  if (static_cast<int>(p.coefficients.size()) != p.n_features()) {
    throw InputError("snapshot: lasso coefficient count does not match the feature space");
  }
  return p;
}

Snapshot snapshot_of(const GroundTruth& truth) {
  Snapshot snap;
  snap.kind = "ground-truth";
  snap.meta["noise_std"] = format_double(truth.noise_std);
  snap.meta["inbred_group"] = join_ints(truth.inbred_group);
  snap.meta["tester_group"] = join_ints(truth.tester_group);
  snap.tensors.push_back({"inbred_factors", truth.inbred_factors});
  snap.tensors.push_back({"tester_factors", truth.tester_factors});
  snap.tensors.push_back({"location_effects", column_of(truth.location_effects)});
  snap.tensors.push_back({"group_effects", column_of(truth.group_effects)});
  return snap;
}

GroundTruth ground_truth_from_snapshot(const Snapshot& snap) {
  if (snap.kind != "ground-truth") {
    throw InputError("snapshot: kind `" + snap.kind + "` is not ground-truth");
  }
  GroundTruth t;
  t.noise_std = snap.meta_double("noise_std");
  t.inbred_group = snap.meta_ints("inbred_group");
  t.tester_group = snap.meta_ints("tester_group");
  t.inbred_factors = snap.require("inbred_factors");
  t.tester_factors = snap.require("tester_factors");
  t.location_effects = column_values(snap, "location_effects");
  t.group_effects = column_values(snap, "group_effects");
  if (t.noise_std < 0.0) throw InputError("snapshot: ground-truth noise_std must be >= 0");
  if (t.inbred_factors.cols() != t.tester_factors.cols()) {
    throw InputError("snapshot: ground-truth factor ranks disagree");
  }
  if (t.inbred_group.size() != t.inbred_factors.rows() ||
      t.tester_group.size() != t.tester_factors.rows()) {
    throw InputError("snapshot: ground-truth group assignments do not match the factor rows");
  }
  const int n_groups = static_cast<int>(t.group_effects.size());
  for (int g : t.inbred_group) {
    if (g < 0 || g >= n_groups) throw InputError("snapshot: ground-truth group id out of range");
  }
  for (int g : t.tester_group) {
    if (g < 0 || g >= n_groups) throw InputError("snapshot: ground-truth group id out of range");
  }
  return t;
}

ModelParams model_from_snapshot(const Snapshot& snap) {
  ModelParams p;
  p.kind = model_kind_from_string(snap.kind);
  p.hyper.k1 = snap.meta_int("k1");
  p.hyper.k2 = snap.meta_int("k2");
  p.hyper.kg = snap.meta_int("kg");
  p.hyper.kl = snap.meta_int("kl");
  p.hyper.mlp_widths = snap.meta_ints("mlp_widths");
  p.hyper.keep_prob = snap.meta_double("keep_prob");
  p.hyper.huber_delta = snap.meta_double("huber_delta");
  p.n_inbreds = snap.meta_int("n_inbreds");
  p.n_testers = snap.meta_int("n_testers");
  p.n_groups = snap.meta_int("n_groups");
  p.n_locations = snap.meta_int("n_locations");

  if (p.kind != ModelKind::gmf_only) p.mlp.resize(p.hyper.mlp_widths.size());

  auto assign = [&](const std::string& name, Matrix& target) {
    target = snap.require(name);
  };
  if (p.kind == ModelKind::hybrid || p.kind == ModelKind::gmf_only) {
    assign("gmf_inbred_embed", p.gmf_inbred_embed);
    assign("gmf_tester_embed", p.gmf_tester_embed);
    assign("gmf_output_w", p.gmf_output_w);
  }
  if (p.kind == ModelKind::hybrid || p.kind == ModelKind::nn_only) {
    assign("nn_inbred_embed", p.nn_inbred_embed);
    assign("nn_tester_embed", p.nn_tester_embed);
  }
  if (p.kind != ModelKind::gmf_only) {
    assign("group_embed", p.group_embed);
    assign("location_embed", p.location_embed);
    for (std::size_t j = 0; j < p.mlp.size(); ++j) {
      assign("mlp" + std::to_string(j + 1) + "_weight", p.mlp[j].weight);
      assign("mlp" + std::to_string(j + 1) + "_bias", p.mlp[j].bias);
    }
  }
  if (p.kind == ModelKind::nn_only || p.kind == ModelKind::coarse) {
    assign("nn_output_w", p.nn_output_w);
    assign("nn_output_b", p.nn_output_b);
  }
  if (p.kind == ModelKind::hybrid) {
    assign("fusion_w", p.fusion_w);
    assign("fusion_b", p.fusion_b);
  }
  p.validate();
  return p;
}

}  // namespace crossyield
