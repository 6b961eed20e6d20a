// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "crossyield/fm.hpp"
#include "crossyield/rng.hpp"
#include "crossyield/snapshot.hpp"
#include "crossyield/synthetic.hpp"
#include "support/test_util.hpp"

using namespace crossyield;

namespace {

constexpr double kDelta = 0.1;
constexpr double kFdStep = 1e-5;
constexpr double kKinkMargin = 3e-4;

struct Example {
  int b, t, g, l;
  double y;
};

FMParams random_fm(std::uint64_t seed, int n_b = 3, int n_t = 3, int n_g = 2, int n_l = 2,
                   int k = 3) {
  Rng rng(seed);
  FMParams p = init_fm(n_b, n_t, n_g, n_l, k, rng);
  p.w0(0, 0) = rng.uniform(-0.2, 0.2);
  for (double& v : p.w.flat()) v = rng.uniform(-0.3, 0.3);
  return p;
}

DeepFMParams random_deepfm(std::uint64_t seed, int n_b = 3, int n_t = 3, int n_g = 2, int n_l = 2,
                           int k = 3) {
  Rng rng(seed);
  DeepFMParams p = init_deepfm(n_b, n_t, n_g, n_l, k, rng);
  p.w0(0, 0) = rng.uniform(-0.2, 0.2);
  for (double& v : p.w.flat()) v = rng.uniform(-0.3, 0.3);
  return p;
}

std::vector<Example> full_cover_batch(int n_b, int n_t, int n_g, int n_l, Rng& rng) {
  std::vector<Example> batch;
  for (int b = 0; b < n_b; ++b)
    for (int t = 0; t < n_t; ++t)
      for (int g = 0; g < n_g; ++g)
        for (int l = 0; l < n_l; ++l) {
          // Alternate targets between the quadratic and linear Huber branches.
          const double y = batch.size() % 2 == 0 ? rng.uniform(0.01, 0.06)
                                                 : rng.uniform(0.4, 1.2);
          batch.push_back({b, t, g, l, y});
        }
  return batch;
}

// The textbook form: bias, linear terms, then all six explicit pairs.
double naive_fm(const FMParams& p, int b, int t, int g, int l) {
  const std::vector<int> a = {p.inbred_feature(b), p.tester_feature(t), p.group_feature(g),
                              p.location_feature(l)};
  double acc = p.w0(0, 0);
  for (int j : a) acc += p.w(static_cast<std::size_t>(j), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      double dot = 0.0;
      for (int f = 0; f < p.latent_dim; ++f) {
        dot += p.V(static_cast<std::size_t>(a[i]), static_cast<std::size_t>(f)) *
               p.V(static_cast<std::size_t>(a[j]), static_cast<std::size_t>(f));
      }
      acc += dot;
    }
  }
  return acc;
}

template <class P>
std::vector<double*> flatten(P& params) {
  std::vector<double*> out;
  for (auto& nt : params.tensors()) {
    Matrix& m = *nt.tensor;
    for (std::size_t i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  }
  return out;
}

double fm_batch_loss(const FMParams& p, const std::vector<Example>& batch) {
  double acc = 0.0;
  for (const auto& e : batch) {
    acc += huber_loss(e.y, fm_forward(p, e.b, e.t, e.g, e.l).prediction, kDelta);
  }
  return acc;
}

double deepfm_batch_loss(const DeepFMParams& p, const std::vector<Example>& batch) {
  double acc = 0.0;
  for (const auto& e : batch) {
    acc += huber_loss(e.y, deepfm_forward(p, e.b, e.t, e.g, e.l, Mode::infer, nullptr).prediction,
                      kDelta);
  }
  return acc;
}

bool fm_kink_free(const FMParams& p, const std::vector<Example>& batch) {
  for (const auto& e : batch) {
    const double r = e.y - fm_forward(p, e.b, e.t, e.g, e.l).prediction;
    if (std::abs(std::abs(r) - kDelta) < kKinkMargin) return false;
  }
  return true;
}

bool deepfm_kink_free(const DeepFMParams& p, const std::vector<Example>& batch) {
  for (const auto& e : batch) {
    const auto trace = deepfm_forward(p, e.b, e.t, e.g, e.l, Mode::infer, nullptr);
    if (std::abs(std::abs(e.y - trace.prediction) - kDelta) < kKinkMargin) return false;
    for (const auto& pre : trace.pre) {
      for (double v : pre) {
        if (std::abs(v) < kKinkMargin) return false;
      }
    }
  }
  return true;
}

template <class P, class LossFn, class BackFn>
std::pair<double, std::size_t> gradient_check(P& params, const std::vector<Example>& batch,
                                              LossFn&& loss_fn, BackFn&& back_fn) {
  P grads = params;
  for (auto& nt : grads.tensors()) nt.tensor->fill(0.0);
  back_fn(params, batch, grads);

  auto coords = flatten(params);
  auto gcoords = flatten(grads);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double orig = *coords[i];
    *coords[i] = orig + kFdStep;
    const double up = loss_fn(params, batch);
    *coords[i] = orig - kFdStep;
    const double down = loss_fn(params, batch);
    *coords[i] = orig;
    const double fd = (up - down) / (2.0 * kFdStep);
    const double a = *gcoords[i];
    const double rel = std::abs(fd - a) / std::max(std::abs(fd) + std::abs(a), 1e-8);
    max_rel = std::max(max_rel, rel);
  }
  return {max_rel, coords.size()};
}

void fm_accumulate(const FMParams& p, const std::vector<Example>& batch, FMParams& grads) {
  for (const auto& e : batch) {
    FMTrace trace = fm_forward(p, e.b, e.t, e.g, e.l);
    fm_backward_into(p, trace, huber_grad(e.y, trace.prediction, kDelta), grads);
  }
}

void deepfm_accumulate(const DeepFMParams& p, const std::vector<Example>& batch,
                       DeepFMParams& grads) {
  for (const auto& e : batch) {
    DeepFMTrace trace = deepfm_forward(p, e.b, e.t, e.g, e.l, Mode::infer, nullptr);
    deepfm_backward_into(p, trace, huber_grad(e.y, trace.prediction, kDelta), grads);
  }
}

Dataset small_synth(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_inbreds = 10;
  cfg.n_testers = 8;
  cfg.n_locations = 4;
  cfg.n_groups = 3;
  cfg.latent_rank = 4;
  cfg.observed_combo_fraction = 0.5;
  cfg.replicates_min = 2;
  cfg.replicates_max = 3;
  cfg.noise_std = 0.02;
  cfg.seed = seed;
  return generate_synthetic(cfg).first;
}

}  // namespace

TEST_SUITE("fm") {

TEST_CASE("fast pairwise identity matches the naive six-term sum") {
  Rng rng(7);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FMParams p = random_fm(seed, 4, 3, 3, 2, 5);
    for (int trial = 0; trial < 30; ++trial) {
      const int b = static_cast<int>(rng.uniform_index(4));
      const int t = static_cast<int>(rng.uniform_index(3));
      const int g = static_cast<int>(rng.uniform_index(3));
      const int l = static_cast<int>(rng.uniform_index(2));
      const double fast = fm_forward(p, b, t, g, l).prediction;
      const double naive = naive_fm(p, b, t, g, l);
      CHECK(std::abs(fast - naive) < 1e-12);
    }
  }
}

TEST_CASE("zero factors reduce the machine to its linear part") {
  FMParams p = random_fm(3);
  p.V.fill(0.0);
  const double pred = fm_forward(p, 1, 2, 0, 1).prediction;
  const double linear = p.w0(0, 0) + p.w(p.inbred_feature(1), 0) + p.w(p.tester_feature(2), 0) +
                        p.w(p.group_feature(0), 0) + p.w(p.location_feature(1), 0);
  CHECK(pred == linear);
}

TEST_CASE("all-zero parameters predict zero") {
  Rng rng(1);
  FMParams p = init_fm(3, 3, 2, 2, 4, rng);
  for (auto& nt : p.tensors()) nt.tensor->fill(0.0);
  CHECK(fm_forward(p, 0, 0, 0, 0).prediction == 0.0);
  CHECK(fm_forward(p, 2, 2, 1, 1).prediction == 0.0);
}

TEST_CASE("index validation") {
  FMParams p = random_fm(5);
  CHECK_THROWS_AS(fm_forward(p, 3, 0, 0, 0), InputError);
  CHECK_THROWS_AS(fm_forward(p, 0, -1, 0, 0), InputError);
  CHECK_THROWS_AS(fm_forward(p, 0, 0, 2, 0), InputError);
  CHECK_THROWS_AS(fm_forward(p, 0, 0, 0, 9), InputError);
  DeepFMParams d = random_deepfm(5);
  CHECK_THROWS_AS(deepfm_forward(d, 3, 0, 0, 0, Mode::infer, nullptr), InputError);
}

TEST_CASE("fm gradients match finite differences") {
  bool found = false;
  for (std::uint64_t seed = 60; seed < 80 && !found; ++seed) {
    FMParams p = random_fm(seed);
    Rng rng(seed + 1000);
    auto batch = full_cover_batch(3, 3, 2, 2, rng);
    if (!fm_kink_free(p, batch)) continue;
    found = true;
    auto [max_rel, n_coords] = gradient_check(p, batch, fm_batch_loss, fm_accumulate);
    CHECK(n_coords > 30);
    CHECK(max_rel < 1e-5);
  }
  REQUIRE(found);
}

TEST_CASE("deepfm zeroed tower reduces to fm over the shared embeddings") {
  DeepFMParams d = random_deepfm(9);
  d.deep_out_w.fill(0.0);
  d.deep_out_b.fill(0.0);

  // An FM whose V stacks the four embedding tables row-block by row-block.
  FMParams f;
  f.n_inbreds = d.n_inbreds;
  f.n_testers = d.n_testers;
  f.n_groups = d.n_groups;
  f.n_locations = d.n_locations;
  f.latent_dim = d.latent_dim;
  f.w0 = d.w0;
  f.w = d.w;
  f.V = Matrix(static_cast<std::size_t>(f.n_features()),
               static_cast<std::size_t>(f.latent_dim));
  std::size_t row = 0;
  for (const Matrix* table :
       {&d.inbred_embed, &d.tester_embed, &d.group_embed, &d.location_embed}) {
    for (std::size_t r = 0; r < table->rows(); ++r, ++row) {
      for (std::size_t c = 0; c < table->cols(); ++c) f.V(row, c) = (*table)(r, c);
    }
  }

  for (int b = 0; b < d.n_inbreds; ++b) {
    for (int t = 0; t < d.n_testers; ++t) {
      const auto trace = deepfm_forward(d, b, t, b % d.n_groups, t % d.n_locations, Mode::infer,
                                        nullptr);
      CHECK(trace.deep_component == 0.0);
      CHECK(trace.prediction == trace.fm_component);
      CHECK(trace.fm_component ==
            fm_forward(f, b, t, b % d.n_groups, t % d.n_locations).prediction);
    }
  }
}

TEST_CASE("embedding storage is shared by both components") {
  DeepFMParams d = random_deepfm(13);
  const auto before = deepfm_forward(d, 1, 2, 1, 0, Mode::infer, nullptr);
  for (std::size_t c = 0; c < d.inbred_embed.cols(); ++c) d.inbred_embed(1, c) += 0.25;
  const auto after = deepfm_forward(d, 1, 2, 1, 0, Mode::infer, nullptr);
  CHECK(after.fm_component != before.fm_component);
  CHECK(after.deep_component != before.deep_component);

  // An input that does not touch the mutated row sees no change at all.
  const auto other_before = deepfm_forward(d, 0, 2, 1, 0, Mode::infer, nullptr);
  for (std::size_t c = 0; c < d.inbred_embed.cols(); ++c) d.inbred_embed(1, c) -= 0.25;
  const auto other_after = deepfm_forward(d, 0, 2, 1, 0, Mode::infer, nullptr);
  CHECK(other_before.prediction == other_after.prediction);
}

TEST_CASE("deepfm gradients match finite differences") {
  bool found = false;
  for (std::uint64_t seed = 200; seed < 220 && !found; ++seed) {
    DeepFMParams p = random_deepfm(seed);
    Rng rng(seed + 2000);
    auto batch = full_cover_batch(3, 3, 2, 2, rng);
    if (!deepfm_kink_free(p, batch)) continue;
    found = true;
    auto [max_rel, n_coords] = gradient_check(p, batch, deepfm_batch_loss, deepfm_accumulate);
    CHECK(n_coords > 1000);
    CHECK(max_rel < 1e-5);
  }
  REQUIRE(found);
}

TEST_CASE("deepfm dropout semantics") {
  DeepFMParams p = random_deepfm(21);
  CHECK(p.keep_prob == 0.6);
  CHECK_THROWS_AS(deepfm_forward(p, 0, 0, 0, 0, Mode::train, nullptr), InputError);

  Rng r1(77), r2(77), r3(78);
  const auto a = deepfm_forward(p, 0, 0, 0, 0, Mode::train, &r1);
  const auto b = deepfm_forward(p, 0, 0, 0, 0, Mode::train, &r2);
  const auto c = deepfm_forward(p, 0, 0, 0, 0, Mode::train, &r3);
  CHECK(a.prediction == b.prediction);
  CHECK(a.prediction != c.prediction);
  const double inv_keep = 1.0 / p.keep_prob;
  for (const auto& layer_scale : a.drop_scale) {
    for (double s : layer_scale) CHECK((s == 0.0 || s == inv_keep));
  }

  // Inference ignores the rng and applies no scaling.
  const auto d0 = deepfm_forward(p, 0, 0, 0, 0, Mode::infer, nullptr);
  const auto d1 = deepfm_forward(p, 0, 0, 0, 0, Mode::infer, &r1);
  CHECK(d0.prediction == d1.prediction);
  for (const auto& layer_scale : d0.drop_scale) {
    for (double s : layer_scale) CHECK(s == 1.0);
  }
}

TEST_CASE("fm training is deterministic and learns") {
  Dataset ds = small_synth(31);
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.max_iterations = 400;
  cfg.seed = 17;
  FMTrainResult a = train_fm(ds, idx, 8, cfg);
  FMTrainResult b = train_fm(ds, idx, 8, cfg);
  CHECK(a.params.w0 == b.params.w0);
  CHECK(a.params.w == b.params.w);
  CHECK(a.params.V == b.params.V);
  REQUIRE(a.history.size() == 400);

  double early = 0.0, late = 0.0;
  for (int i = 0; i < 20; ++i) early += a.history[static_cast<std::size_t>(i)].train_loss;
  for (int i = 380; i < 400; ++i) late += a.history[static_cast<std::size_t>(i)].train_loss;
  CHECK(late < 0.5 * early);
}

TEST_CASE("deepfm training is deterministic") {
  Dataset ds = small_synth(37);
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  TrainConfig cfg;
  cfg.max_iterations = 50;
  cfg.seed = 23;
  DeepFMTrainResult a = train_deepfm(ds, idx, 4, cfg);
  DeepFMTrainResult b = train_deepfm(ds, idx, 4, cfg);
  CHECK(a.params.inbred_embed == b.params.inbred_embed);
  CHECK(a.params.deep[0].weight == b.params.deep[0].weight);
  CHECK(a.params.deep_out_w == b.params.deep_out_w);
  CHECK(a.params.keep_prob == 0.6);
  for (std::size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
}

TEST_CASE("snapshot round-trips for both baselines") {
  auto dir = testutil::scratch_dir("fm_snapshot");

  FMParams f = random_fm(41, 5, 4, 3, 2, 6);
  const auto fpath = (dir / "fm.snap").string();
  save_snapshot(snapshot_of(f), fpath);
  FMParams f2 = fm_from_snapshot(load_snapshot(fpath));
  CHECK(f2.w0 == f.w0);
  CHECK(f2.w == f.w);
  CHECK(f2.V == f.V);
  CHECK(f2.latent_dim == f.latent_dim);
  CHECK(fm_forward(f2, 4, 3, 2, 1).prediction == fm_forward(f, 4, 3, 2, 1).prediction);

  DeepFMParams d = random_deepfm(43, 4, 4, 2, 3, 5);
  const auto dpath = (dir / "deepfm.snap").string();
  save_snapshot(snapshot_of(d), dpath);
  DeepFMParams d2 = deepfm_from_snapshot(load_snapshot(dpath));
  CHECK(d2.keep_prob == d.keep_prob);
  CHECK(d2.inbred_embed == d.inbred_embed);
  CHECK(d2.deep[1].weight == d.deep[1].weight);
  CHECK(deepfm_forward(d2, 3, 3, 1, 2, Mode::infer, nullptr).prediction ==
        deepfm_forward(d, 3, 3, 1, 2, Mode::infer, nullptr).prediction);

  // Cross-kind loading is rejected.
  CHECK_THROWS_AS(fm_from_snapshot(load_snapshot(dpath)), InputError);
  CHECK_THROWS_AS(deepfm_from_snapshot(load_snapshot(fpath)), InputError);
}

}  // TEST_SUITE
