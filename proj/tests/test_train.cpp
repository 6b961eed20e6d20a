// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "crossyield/rng.hpp"
#include "crossyield/synthetic.hpp"
#include "crossyield/train.hpp"
#include "support/test_util.hpp"

using namespace crossyield;

namespace {

HyperParams small_hyper() {
  HyperParams h;
  h.k1 = 8;
  h.k2 = 8;
  h.kg = 4;
  h.kl = 4;
  h.mlp_widths = {16, 8};
  return h;
}

Dataset one_point_dataset() {
  Dataset ds;
  ds.n_inbreds = 1;
  ds.n_testers = 1;
  ds.n_locations = 1;
  ds.n_groups = 1;
  ds.inbred_ids = {"b0"};
  ds.tester_ids = {"t0"};
  ds.location_ids = {"l0"};
  ds.group_ids = {"g0"};
  ds.observations = {{0, 0, 0, 0, 2015, 1.07}};
  ds.inbred_modal_group = {0};
  return ds;
}

Dataset small_synth(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_inbreds = 12;
  cfg.n_testers = 10;
  cfg.n_locations = 4;
  cfg.n_groups = 3;
  cfg.latent_rank = 4;
  cfg.observed_combo_fraction = 0.4;
  cfg.replicates_min = 2;
  cfg.replicates_max = 3;
  cfg.noise_std = 0.02;
  cfg.seed = seed;
  return generate_synthetic(cfg).first;
}

double rmse_on(const ModelParams& params, const Dataset& ds,
               const std::vector<std::size_t>& idx) {
  double ss = 0.0;
  for (std::size_t i : idx) {
    const double r = ds.observations[i].yield - predict(params, ds.observations[i]);
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(idx.size()));
}

bool same_tensors(const ModelParams& a, const ModelParams& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name) return false;
    if (!(*ta[i].tensor == *tb[i].tensor)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("a single observation is memorized") {
  Dataset ds = one_point_dataset();
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.learning_rate = 3e-3;
  cfg.max_iterations = 3000;
  cfg.keep_prob = 1.0;
  cfg.seed = 4;
  TrainResult res = train_model(ModelKind::hybrid, ds, all_indices(ds), small_hyper(), cfg);
  REQUIRE(res.history.size() == 3000);
  CHECK(res.history.back().train_loss < 1e-8);
  CHECK(std::abs(predict(res.params, ds.observations[0]) - 1.07) < 1e-3);
}

TEST_CASE("same seed gives bit-identical runs, different seed does not") {
  Dataset ds = small_synth(3);
  TrainConfig cfg;
  cfg.max_iterations = 60;
  cfg.keep_prob = 0.7;  // exercise the dropout stream too
  cfg.seed = 21;
  auto idx = all_indices(ds);
  TrainResult a = train_model(ModelKind::hybrid, ds, idx, small_hyper(), cfg);
  TrainResult b = train_model(ModelKind::hybrid, ds, idx, small_hyper(), cfg);
  CHECK(same_tensors(a.params, b.params));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].train_loss == b.history[i].train_loss);

  TrainConfig other = cfg;
  other.seed = 22;
  TrainResult c = train_model(ModelKind::hybrid, ds, idx, small_hyper(), other);
  CHECK(!same_tensors(a.params, c.params));
}

TEST_CASE("training at least halves the training RMSE") {
  SyntheticConfig scfg = SyntheticConfig::desk_scale(7);
  Dataset ds = generate_synthetic(scfg).first;
  auto idx = all_indices(ds);

  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_iterations = 1500;
  cfg.seed = 9;
  HyperParams h = small_hyper();
  h.keep_prob = cfg.keep_prob;
  h.huber_delta = cfg.huber_delta;
  Rng init_rng(derive_seed(cfg.seed, kInitSalt));
  ModelParams init =
      init_params(ModelKind::hybrid, h, ds.n_inbreds, ds.n_testers, ds.n_groups, ds.n_locations,
                  init_rng);
  const double before = rmse_on(init, ds, idx);

  TrainResult res = train_model_from(std::move(init), ds, idx, cfg);
  const double after = rmse_on(res.params, ds, idx);
  CHECK(after <= 0.5 * before);
}

TEST_CASE("eval cadence follows eval_every and always covers the last iteration") {
  Dataset ds = small_synth(5);
  auto idx = all_indices(ds);
  TrainConfig cfg;
  cfg.max_iterations = 10;
  cfg.eval_every = 4;
  cfg.seed = 2;
  TrainResult res = train_model(ModelKind::gmf_only, ds, idx, small_hyper(), cfg, &idx);
  REQUIRE(res.history.size() == 10);
  for (const auto& p : res.history) {
    const bool scheduled = p.iteration % 4 == 0 || p.iteration == 10;
    CHECK((p.eval_rmse >= 0.0) == scheduled);
  }
}

TEST_CASE("invalid inputs are rejected") {
  Dataset ds = small_synth(8);
  TrainConfig cfg;
  cfg.max_iterations = 4;
  CHECK_THROWS_AS(train_model(ModelKind::hybrid, ds, {}, small_hyper(), cfg), InputError);
  CHECK_THROWS_AS(train_model(ModelKind::hybrid, ds, {ds.size()}, small_hyper(), cfg),
                  InputError);
  std::vector<std::size_t> bad_eval = {ds.size() + 3};
  auto idx = all_indices(ds);
  CHECK_THROWS_AS(train_model(ModelKind::hybrid, ds, idx, small_hyper(), cfg, &bad_eval),
                  InputError);

  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.keep_prob = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = cfg;
  bad.keep_prob = 1.2;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("non-finite parameters stop training with a diagnostic") {
  Dataset ds = small_synth(13);
  HyperParams h = small_hyper();
  h.keep_prob = 1.0;
  Rng rng(1);
  ModelParams poisoned = init_params(ModelKind::hybrid, h, ds.n_inbreds, ds.n_testers,
                                     ds.n_groups, ds.n_locations, rng);
  poisoned.gmf_inbred_embed.fill(1e200);
  poisoned.gmf_tester_embed.fill(1e200);
  TrainConfig cfg;
  cfg.max_iterations = 5;
  cfg.keep_prob = 1.0;
  try {
    train_model_from(std::move(poisoned), ds, all_indices(ds), cfg);
    FAIL("expected the finiteness guard to throw");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("pretraining transfers exactly the six embedding tables") {
  Dataset ds = small_synth(17);
  auto idx = all_indices(ds);
  HyperParams h = small_hyper();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.max_iterations = 25;
  cfg.keep_prob = 0.7;
  cfg.seed = 11;

  ModelParams hybrid = pretrain_hybrid(ds, idx, h, cfg);

  // Rerun the component legs on their published stage seeds.
  TrainConfig gmf_cfg = cfg;
  gmf_cfg.seed = derive_seed(cfg.seed, kGmfStageSalt);
  TrainResult gmf = train_model(ModelKind::gmf_only, ds, idx, h, gmf_cfg);
  TrainConfig nn_cfg = cfg;
  nn_cfg.seed = derive_seed(cfg.seed, kNnStageSalt);
  TrainResult nn = train_model(ModelKind::nn_only, ds, idx, h, nn_cfg);

  CHECK(hybrid.gmf_inbred_embed == gmf.params.gmf_inbred_embed);
  CHECK(hybrid.gmf_tester_embed == gmf.params.gmf_tester_embed);
  CHECK(hybrid.nn_inbred_embed == nn.params.nn_inbred_embed);
  CHECK(hybrid.nn_tester_embed == nn.params.nn_tester_embed);
  CHECK(hybrid.group_embed == nn.params.group_embed);
  CHECK(hybrid.location_embed == nn.params.location_embed);

  // Everything else is the untouched fresh init from the hybrid's own path.
  HyperParams h2 = h;
  h2.keep_prob = cfg.keep_prob;
  h2.huber_delta = cfg.huber_delta;
  Rng init_rng(derive_seed(cfg.seed, kInitSalt));
  ModelParams fresh = init_params(ModelKind::hybrid, h2, ds.n_inbreds, ds.n_testers, ds.n_groups,
                                  ds.n_locations, init_rng);
  for (std::size_t j = 0; j < hybrid.mlp.size(); ++j) {
    CHECK(hybrid.mlp[j].weight == fresh.mlp[j].weight);
    CHECK(hybrid.mlp[j].bias == fresh.mlp[j].bias);
  }
  CHECK(hybrid.fusion_w == fresh.fusion_w);
  CHECK(hybrid.fusion_b == fresh.fusion_b);
  CHECK(hybrid.gmf_output_w == fresh.gmf_output_w);
  CHECK(!(hybrid.gmf_inbred_embed == fresh.gmf_inbred_embed));
  CHECK(!(hybrid.mlp[0].weight == nn.params.mlp[0].weight));
}

TEST_CASE("zero pretrain iterations reduce to the plain initialization path") {
  Dataset ds = small_synth(19);
  auto idx = all_indices(ds);
  HyperParams h = small_hyper();
  TrainConfig cfg;
  cfg.max_iterations = 40;
  cfg.seed = 6;
  cfg.pretrain_iterations = 0;

  ModelParams start = pretrain_hybrid(ds, idx, h, cfg);
  TrainResult from_pretrain = train_model_from(std::move(start), ds, idx, cfg);
  TrainResult plain = train_model(ModelKind::hybrid, ds, idx, h, cfg);
  CHECK(same_tensors(from_pretrain.params, plain.params));
}

TEST_CASE("loss history file format") {
  auto dir = testutil::scratch_dir("train_history");
  std::vector<LossPoint> plain = {{1, 0.5, -1.0}, {2, 0.25, -1.0}};
  const auto p1 = (dir / "plain.csv").string();
  write_loss_history(plain, p1);
  CHECK(testutil::read_text(p1) == "iteration,train_loss\n1,0.5\n2,0.25\n");

  std::vector<LossPoint> with_eval = {{1, 0.5, -1.0}, {2, 0.25, 0.9}};
  const auto p2 = (dir / "eval.csv").string();
  write_loss_history(with_eval, p2);
  CHECK(testutil::read_text(p2) == "iteration,train_loss,eval_rmse\n1,0.5,\n2,0.25,0.9\n");
}

TEST_CASE("all_indices covers the dataset in order") {
  Dataset ds = small_synth(23);
  auto idx = all_indices(ds);
  REQUIRE(idx.size() == ds.size());
  CHECK(idx.front() == 0);
  CHECK(idx.back() == ds.size() - 1);
}

TEST_CASE("stage-keeping pretrain matches the plain entry point") {
  Dataset ds = small_synth(29);
  auto idx = all_indices(ds);
  HyperParams h = small_hyper();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.max_iterations = 20;
  cfg.seed = 31;

  PretrainStages stages = pretrain_hybrid_stages(ds, idx, h, cfg);
  ModelParams direct = pretrain_hybrid(ds, idx, h, cfg);
  CHECK(same_tensors(stages.init, direct));
  CHECK(stages.gmf_stage.params.kind == ModelKind::gmf_only);
  CHECK(stages.nn_stage.params.kind == ModelKind::nn_only);
  CHECK(stages.gmf_stage.history.size() == 20);
  CHECK(stages.nn_stage.history.size() == 20);

  TrainConfig gmf_cfg = cfg;
  gmf_cfg.seed = derive_seed(cfg.seed, kGmfStageSalt);
  TrainResult gmf = train_model(ModelKind::gmf_only, ds, idx, h, gmf_cfg);
  CHECK(same_tensors(stages.gmf_stage.params, gmf.params));

  cfg.pretrain_iterations = 0;
  PretrainStages zero = pretrain_hybrid_stages(ds, idx, h, cfg);
  CHECK(zero.gmf_stage.history.empty());
  CHECK(zero.nn_stage.history.empty());
}

}  // TEST_SUITE
