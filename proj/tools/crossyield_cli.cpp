// SPDX-License-Identifier: Apache-2.0
//
// crossyield: one binary wiring the library into reproducible pipelines.
// Subcommands exchange data only through files (CSV datasets and text
// snapshots), and every run writes the fully resolved configuration it
// used into its output directory, so any artifact can be regenerated
// from the files sitting next to it.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crossyield/analyze.hpp"
#include "crossyield/dataset.hpp"
#include "crossyield/evaluate.hpp"
#include "crossyield/fm.hpp"
#include "crossyield/lasso.hpp"
#include "crossyield/model.hpp"
#include "crossyield/rng.hpp"
#include "crossyield/snapshot.hpp"
#include "crossyield/synthetic.hpp"
#include "crossyield/train.hpp"
#include "crossyield/tsne.hpp"

namespace {

using namespace crossyield;
namespace fs = std::filesystem;

// Seed salt for the analyze command's per-tercile sampling.
constexpr std::uint64_t kSelectSalt = 0x73656c65;

const char kUsage[] =
    "usage: crossyield <command> [options]\n"
    "\n"
    "commands:\n"
    "  generate        synthesize a dataset and its generator ground truth\n"
    "  train           fit one model on a dataset; writes snapshot + loss history\n"
    "  evaluate        cross-validation or holdout metrics for one model\n"
    "  predict-matrix  full inbred x tester prediction grid from a snapshot\n"
    "  analyze         parent terciles, latent exports, optional t-SNE map\n"
    "\n"
    "Run `crossyield <command> --help` for that command's options. Any option\n"
    "can also come from a --config file (flat `key = value` lines; command-line\n"
    "flags beat file entries) or from the environment as CROSSYIELD_<NAME>\n"
    "(e.g. CROSSYIELD_SEED=7). Every run writes the fully resolved\n"
    "configuration it used to <out-dir>/run_config.txt.\n";

std::string env_name(const std::string& key) {
  std::string out = "CROSSYIELD_";
  for (char ch : key) {
    out += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return out;
}

/// Registers options with a CROSSYIELD_* environment fallback and remembers
/// how to print each one, so a run can write back the exact configuration it
/// resolved. Precedence: command line, then --config entries, then the
/// environment, then the built-in default.
class OptionBinder {
 public:
  explicit OptionBinder(CLI::App& app) : app_(&app) {}

  template <typename T>
  CLI::Option* add(const std::string& key, T& var, const std::string& desc) {
    CLI::Option* opt = app_->add_option("--" + key, var, desc)
                           ->capture_default_str()
                           ->envname(env_name(key));
    entries_.emplace_back(key, [&var] { return render(var); });
    return opt;
  }

  CLI::Option* add_flag(const std::string& key, bool& var, const std::string& desc) {
    CLI::Option* opt = app_->add_flag("--" + key, var, desc)->envname(env_name(key));
    entries_.emplace_back(key, [&var] { return std::string(var ? "true" : "false"); });
    return opt;
  }

  void write_resolved(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "# resolved configuration; reusable via --config\n";
    for (const auto& [key, get] : entries_) out << key << " = " << get() << "\n";
    if (!out) throw InputError("write failed for " + path.string());
  }

 private:
  static std::string render(const double& v) { return format_double(v); }
  static std::string render(const std::string& v) { return "\"" + v + "\""; }
  template <typename T>
  static std::string render(const T& v) {
    return std::to_string(v);
  }

  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";
  std::string data;
  std::string snapshot;
  std::string model = "hybrid";
  std::string protocol = "cv";

  SyntheticConfig synth;
  bool paper = false;

  HyperParams hyper;
  std::string mlp_widths = "64,32,16";

  TrainConfig train;
  int fm_latent_dim = 32;
  LassoConfig lasso;

  int folds = 10;
  std::size_t n_combos = 0;

  std::string parents = "inbreds";
  std::string component = "gmf";
  int per_category = 0;
  bool tsne = false;
  bool from_init = false;
  double perplexity = 30.0;
  int tsne_iterations = 1000;
  double tsne_learning_rate = 200.0;

  int heatmap_inbreds = 0;
  int heatmap_testers = 0;
};

void configure_app(CLI::App& app, const std::string& name) {
  app.name("crossyield " + name);
  app.set_config("--config", "", "Flat `key = value` file; command-line flags win")
      ->envname(env_name("config"));
  app.allow_config_extras(CLI::config_extras_mode::error);
}

void add_shared(OptionBinder& b, RunConfig& rc) {
  b.add("seed", rc.seed, "Root seed; every random stream derives from it");
  b.add("threads", rc.threads,
        "Worker threads for the prediction matrix (other paths are single threaded)");
  b.add("out-dir", rc.out_dir, "Directory receiving every artifact of this run");
}

void add_data(OptionBinder& b, RunConfig& rc) {
  b.add("data", rc.data, "Input dataset CSV (inbred,tester,location,genetic_group,year,yield)");
}

void add_model_choice(OptionBinder& b, RunConfig& rc) {
  b.add("model", rc.model, "hybrid | gmf_only | nn_only | coarse | fm | deepfm | lasso");
}

void add_network(OptionBinder& b, RunConfig& rc) {
  b.add("k1", rc.hyper.k1, "GMF embedding width");
  b.add("k2", rc.hyper.k2, "MLP parent embedding width");
  b.add("kg", rc.hyper.kg, "Genetic group embedding width");
  b.add("kl", rc.hyper.kl, "Location embedding width");
  b.add("mlp-widths", rc.mlp_widths, "Comma-separated hidden layer widths");
}

void add_training(OptionBinder& b, RunConfig& rc) {
  b.add("batch-size", rc.train.batch_size, "Mini-batch size");
  b.add("learning-rate", rc.train.learning_rate, "Adam learning rate");
  b.add("iterations", rc.train.max_iterations, "Training iterations (mini-batches)");
  b.add("beta1", rc.train.beta1, "Adam first-moment decay");
  b.add("beta2", rc.train.beta2, "Adam second-moment decay");
  b.add("epsilon", rc.train.epsilon, "Adam denominator floor");
  b.add("huber-delta", rc.train.huber_delta, "Huber loss threshold");
  b.add("keep-prob", rc.train.keep_prob, "Inverted-dropout keep probability");
  b.add("eval-every", rc.train.eval_every, "Iterations between eval points (0 = never)");
  b.add_flag("pretrain", rc.train.pretrain,
             "Initialize the hybrid from separate GMF and MLP stage runs");
  b.add("pretrain-iterations", rc.train.pretrain_iterations,
        "Iterations per pretraining stage (-1 = same as --iterations)");
}

void add_baselines(OptionBinder& b, RunConfig& rc) {
  b.add("fm-latent-dim", rc.fm_latent_dim, "Factor width for fm and deepfm");
  b.add("l1-lambda", rc.lasso.l1_lambda, "LASSO penalty weight");
  b.add("lasso-tol", rc.lasso.tol, "LASSO convergence tolerance");
  b.add("lasso-max-sweeps", rc.lasso.max_sweeps, "LASSO sweep cap");
}

using PresetRules = std::vector<std::function<void(const SyntheticConfig&)>>;

template <typename T>
void bind_synth(OptionBinder& b, PresetRules& rules, const std::string& key,
                T SyntheticConfig::* member, SyntheticConfig& target, const std::string& desc) {
  CLI::Option* opt = b.add(key, target.*member, desc);
  rules.push_back([opt, &target, member](const SyntheticConfig& preset) {
    if (opt->count() == 0) target.*member = preset.*member;
  });
}

PresetRules add_synthetic(OptionBinder& b, RunConfig& rc) {
  PresetRules rules;
  SyntheticConfig& s = rc.synth;
  bind_synth(b, rules, "n-inbreds", &SyntheticConfig::n_inbreds, s, "Inbred parent count");
  bind_synth(b, rules, "n-testers", &SyntheticConfig::n_testers, s, "Tester parent count");
  bind_synth(b, rules, "n-locations", &SyntheticConfig::n_locations, s, "Location count");
  bind_synth(b, rules, "n-groups", &SyntheticConfig::n_groups, s, "Genetic group count");
  bind_synth(b, rules, "latent-rank", &SyntheticConfig::latent_rank, s,
             "Rank of the planted interaction");
  bind_synth(b, rules, "observed-combo-fraction", &SyntheticConfig::observed_combo_fraction, s,
             "Fraction of parent pairs observed");
  bind_synth(b, rules, "replicates-min", &SyntheticConfig::replicates_min, s,
             "Fewest observations per tested pair");
  bind_synth(b, rules, "replicates-max", &SyntheticConfig::replicates_max, s,
             "Most observations per tested pair");
  bind_synth(b, rules, "noise-std", &SyntheticConfig::noise_std, s, "Observation noise std");
  bind_synth(b, rules, "interaction-scale", &SyntheticConfig::interaction_scale, s,
             "Weight of the latent interaction term");
  bind_synth(b, rules, "location-scale", &SyntheticConfig::location_scale, s,
             "Location effect std");
  bind_synth(b, rules, "group-scale", &SyntheticConfig::group_scale, s, "Group effect std");
  bind_synth(b, rules, "tester-factor-mean", &SyntheticConfig::tester_factor_mean, s,
             "Mean of tester factor entries (plants parent marginals)");
  bind_synth(b, rules, "global-mean", &SyntheticConfig::global_mean, s, "Baseline yield level");
  b.add_flag("paper-scale", rc.paper,
             "Start from the calibrated full-size preset; explicit options still win");
  return rules;
}

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> widths;
  std::istringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    int v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
      throw InputError("bad mlp-widths entry `" + token + "`");
    }
    widths.push_back(v);
  }
  if (widths.empty()) throw InputError("mlp-widths must list at least one layer width");
  return widths;
}

HyperParams resolve_hyper(const RunConfig& rc) {
  HyperParams h = rc.hyper;
  h.mlp_widths = parse_widths(rc.mlp_widths);
  h.keep_prob = rc.train.keep_prob;
  h.huber_delta = rc.train.huber_delta;
  return h;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

fs::path prepare_out_dir(const RunConfig& rc) {
  fs::path out(rc.out_dir);
  fs::create_directories(out);
  return out;
}

void require_threads(const RunConfig& rc) {
  if (rc.threads < 1) throw InputError("threads must be >= 1");
}

Dataset load_data(const RunConfig& rc, const std::string& command) {
  if (rc.data.empty()) throw InputError(command + ": --data is required");
  return load_csv(rc.data);
}

/// Loads a snapshot that must hold one of the network variants.
ModelParams load_network_params(const std::string& path, const std::string& command) {
  if (path.empty()) throw InputError(command + ": --snapshot is required");
  Snapshot snap = load_snapshot(path);
  ModelKind kind;
  try {
    kind = model_kind_from_string(snap.kind);
  } catch (const InputError&) {
    throw InputError(command + ": snapshot kind `" + snap.kind + "` is not a network model");
  }
  (void)kind;
  return model_from_snapshot(snap);
}

int cmd_generate(int argc, char** argv) {
  CLI::App app{"Synthesize a yield dataset plus its generator ground truth"};
  configure_app(app, "generate");
  RunConfig rc;
  OptionBinder bind(app);
  add_shared(bind, rc);
  PresetRules rules = add_synthetic(bind, rc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  require_threads(rc);

  if (rc.paper) {
    const SyntheticConfig preset = SyntheticConfig::paper_scale(rc.seed);
    for (const auto& rule : rules) rule(preset);
  }
  rc.synth.seed = rc.seed;

  auto [ds, truth] = generate_synthetic(rc.synth);
  const fs::path out = prepare_out_dir(rc);
  write_csv(ds, (out / "dataset.csv").string());
  save_snapshot(snapshot_of(truth), (out / "ground_truth.snap").string());
  bind.write_resolved(out / "run_config.txt");

  const CensusSummary c = census(ds);
  std::cout << (out / "dataset.csv").string() << ": " << c.observation_count << " observations, "
            << c.n_inbreds << " inbreds x " << c.n_testers << " testers, " << c.n_locations
            << " locations, " << c.n_groups << " groups, " << c.tested_combinations
            << " tested combinations, yield " << format_double(c.yield_mean) << " +/- "
            << format_double(c.yield_std) << "\n";
  return 0;
}

void write_objective_history(const Vec& history, const fs::path& path) {
  std::string text = "sweep,objective\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    text += std::to_string(i + 1) + "," + format_double(history[i]) + "\n";
  }
  write_text_file(path, text);
}

int cmd_train(int argc, char** argv) {
  CLI::App app{"Fit one model on a dataset; writes a snapshot and loss history"};
  configure_app(app, "train");
  RunConfig rc;
  OptionBinder bind(app);
  add_shared(bind, rc);
  add_data(bind, rc);
  add_model_choice(bind, rc);
  add_network(bind, rc);
  add_training(bind, rc);
  add_baselines(bind, rc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  require_threads(rc);

  const EvalModel model = eval_model_from_string(rc.model);
  const Dataset ds = load_data(rc, "train");
  const auto idx = all_indices(ds);
  TrainConfig tc = rc.train;
  tc.seed = rc.seed;

  const fs::path out = prepare_out_dir(rc);
  bind.write_resolved(out / "run_config.txt");
  const std::string snap_path = (out / "model.snap").string();

  switch (model) {
    case EvalModel::lasso: {
      const LassoParams fitted = lasso_fit(ds, idx, rc.lasso);
      save_snapshot(snapshot_of(fitted), snap_path);
      write_objective_history(fitted.objective_history, out / "objective_history.csv");
      const auto nonzero = std::count_if(fitted.coefficients.begin(), fitted.coefficients.end(),
                                         [](double c) { return c != 0.0; });
      std::cout << snap_path << ": lasso, " << fitted.sweeps_run << " sweeps, "
                << (fitted.converged ? "converged" : "sweep cap hit") << ", " << nonzero << " of "
                << fitted.n_features() << " coefficients nonzero\n";
      return 0;
    }
    case EvalModel::fm: {
      const FMTrainResult r = train_fm(ds, idx, rc.fm_latent_dim, tc);
      save_snapshot(snapshot_of(r.params), snap_path);
      write_loss_history(r.history, (out / "loss_history.csv").string());
      std::cout << snap_path << ": fm, " << r.history.size() << " iterations\n";
      return 0;
    }
    case EvalModel::deepfm: {
      const DeepFMTrainResult r = train_deepfm(ds, idx, rc.fm_latent_dim, tc);
      save_snapshot(snapshot_of(r.params), snap_path);
      write_loss_history(r.history, (out / "loss_history.csv").string());
      std::cout << snap_path << ": deepfm, " << r.history.size() << " iterations\n";
      return 0;
    }
    default: {
      const ModelKind kind = model_kind_from_string(rc.model);
      const HyperParams hyper = resolve_hyper(rc);
      TrainResult result;
      if (kind == ModelKind::hybrid && tc.pretrain) {
        PretrainStages stages = pretrain_hybrid_stages(ds, idx, hyper, tc);
        if (!stages.gmf_stage.history.empty()) {
          save_snapshot(snapshot_of(stages.gmf_stage.params), (out / "gmf_stage.snap").string());
          save_snapshot(snapshot_of(stages.nn_stage.params), (out / "nn_stage.snap").string());
          write_loss_history(stages.gmf_stage.history, (out / "gmf_stage_loss.csv").string());
          write_loss_history(stages.nn_stage.history, (out / "nn_stage_loss.csv").string());
        }
        result = train_model_from(std::move(stages.init), ds, idx, tc);
      } else {
        result = train_model(kind, ds, idx, hyper, tc);
      }
      save_snapshot(snapshot_of(result.params), snap_path);
      write_loss_history(result.history, (out / "loss_history.csv").string());
      std::cout << snap_path << ": " << rc.model << ", " << result.history.size()
                << " iterations";
      if (!result.history.empty()) {
        std::cout << ", final batch loss " << format_double(result.history.back().train_loss);
      }
      std::cout << "\n";
      return 0;
    }
  }
}

int cmd_evaluate(int argc, char** argv) {
  CLI::App app{"Score one model under cross validation or the holdout protocol"};
  configure_app(app, "evaluate");
  RunConfig rc;
  OptionBinder bind(app);
  add_shared(bind, rc);
  add_data(bind, rc);
  add_model_choice(bind, rc);
  bind.add("protocol", rc.protocol, "cv | holdout");
  bind.add("folds", rc.folds, "Fold count for cross validation");
  bind.add("n-combos", rc.n_combos, "Held-out tested combinations for the holdout protocol");
  add_network(bind, rc);
  add_training(bind, rc);
  add_baselines(bind, rc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  require_threads(rc);

  const EvalModel model = eval_model_from_string(rc.model);
  const Protocol protocol = protocol_from_string(rc.protocol);
  const Dataset ds = load_data(rc, "evaluate");

  EvalConfig ec;
  ec.hyper = resolve_hyper(rc);
  ec.train = rc.train;
  ec.train.seed = rc.seed;
  ec.fm_latent_dim = rc.fm_latent_dim;
  ec.lasso = rc.lasso;
  ec.cv_folds = rc.folds;
  ec.holdout_combos = rc.n_combos;

  const fs::path out = prepare_out_dir(rc);
  bind.write_resolved(out / "run_config.txt");

  const EvalReport report = protocol == Protocol::cross_validation
                                ? run_cv(model, ds, rc.folds, ec)
                                : run_holdout(model, ds, rc.n_combos, ec);
  write_reports_csv({report}, (out / "reports.csv").string());
  write_folds_csv({report}, (out / "folds.csv").string());
  const std::string text = format_reports_text({report});
  write_text_file(out / "report.txt", text);
  std::cout << text;
  return 0;
}

int cmd_predict_matrix(int argc, char** argv) {
  CLI::App app{"Predict every inbred x tester cross from a trained snapshot"};
  configure_app(app, "predict-matrix");
  RunConfig rc;
  OptionBinder bind(app);
  add_shared(bind, rc);
  add_data(bind, rc);
  bind.add("snapshot", rc.snapshot, "Trained network snapshot to predict with");
  bind.add("heatmap-inbreds", rc.heatmap_inbreds,
           "Also export a heatmap of the first N inbreds (0 = skip unless testers set)");
  bind.add("heatmap-testers", rc.heatmap_testers,
           "Also export a heatmap of the first N testers (0 = all in the heatmap)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  require_threads(rc);

  const Dataset ds = load_data(rc, "predict-matrix");
  const ModelParams params = load_network_params(rc.snapshot, "predict-matrix");
  const PredictionMatrix matrix = predict_full_matrix(params, ds, rc.threads);

  const fs::path out = prepare_out_dir(rc);
  bind.write_resolved(out / "run_config.txt");
  export_heatmap(matrix, {}, {}, (out / "matrix.csv").string());

  if (rc.heatmap_inbreds > 0 || rc.heatmap_testers > 0) {
    if (rc.heatmap_inbreds < 0 || rc.heatmap_inbreds > ds.n_inbreds) {
      throw InputError("predict-matrix: --heatmap-inbreds outside [0, inbred count]");
    }
    if (rc.heatmap_testers < 0 || rc.heatmap_testers > ds.n_testers) {
      throw InputError("predict-matrix: --heatmap-testers outside [0, tester count]");
    }
    auto prefix = [](int n) {
      std::vector<int> v(static_cast<std::size_t>(n));
      std::iota(v.begin(), v.end(), 0);
      return v;
    };
    const auto inbreds = rc.heatmap_inbreds > 0 ? prefix(rc.heatmap_inbreds) : std::vector<int>{};
    const auto testers = rc.heatmap_testers > 0 ? prefix(rc.heatmap_testers) : std::vector<int>{};
    export_heatmap(matrix, inbreds, testers, (out / "heatmap.csv").string());
  }

  std::cout << (out / "matrix.csv").string() << ": " << matrix.cells.rows() << " x "
            << matrix.cells.cols() << " = " << matrix.cells.rows() * matrix.cells.cols()
            << " cells\n";
  return 0;
}

std::vector<std::string> sample_per_tercile(const CategorizedParents& cats,
                                            const std::vector<std::string>& ids, int per_category,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> selected;
  for (Tercile tercile : {Tercile::low, Tercile::medium, Tercile::high}) {
    std::vector<int> members;
    for (const auto& cat : cats.categories) {
      if (cat.tercile == tercile) members.push_back(cat.index);
    }
    if (static_cast<int>(members.size()) < per_category) {
      throw InputError("analyze: tercile `" + to_string(tercile) + "` has only " +
                       std::to_string(members.size()) + " parents, need " +
                       std::to_string(per_category));
    }
    rng.shuffle(members);
    members.resize(static_cast<std::size_t>(per_category));
    std::sort(members.begin(), members.end());
    for (int m : members) selected.push_back(ids[static_cast<std::size_t>(m)]);
  }
  return selected;
}

int cmd_analyze(int argc, char** argv) {
  CLI::App app{"Categorize parents, export latent factors, optionally embed them with t-SNE"};
  configure_app(app, "analyze");
  RunConfig rc;
  OptionBinder bind(app);
  add_shared(bind, rc);
  add_data(bind, rc);
  bind.add("snapshot", rc.snapshot, "Trained network snapshot providing the latent tables");
  bind.add_flag("from-init", rc.from_init,
                "Use fresh untrained parameters instead of a snapshot (the `before` export)");
  add_model_choice(bind, rc);
  add_network(bind, rc);
  bind.add("parents", rc.parents, "inbreds | testers");
  bind.add("component", rc.component, "gmf | nn (which embedding table to export)");
  bind.add("per-category", rc.per_category,
           "Sample this many parents from each tercile (0 = all categorized parents)");
  bind.add_flag("tsne", rc.tsne, "Embed the exported latents into 2-D");
  bind.add("perplexity", rc.perplexity, "t-SNE perplexity");
  bind.add("tsne-iterations", rc.tsne_iterations, "t-SNE gradient steps");
  bind.add("tsne-learning-rate", rc.tsne_learning_rate, "t-SNE learning rate");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  require_threads(rc);

  if (rc.from_init && !rc.snapshot.empty()) {
    throw InputError("analyze: --from-init and --snapshot are mutually exclusive");
  }
  if (!rc.from_init && rc.snapshot.empty()) {
    throw InputError("analyze: provide --snapshot or --from-init");
  }

  const Dataset ds = load_data(rc, "analyze");
  ModelParams params;
  if (rc.from_init) {
    const ModelKind kind = model_kind_from_string(rc.model);
    Rng rng(derive_seed(rc.seed, kInitSalt));
    params = init_params(kind, resolve_hyper(rc), ds.n_inbreds, ds.n_testers, ds.n_groups,
                         ds.n_locations, rng);
  } else {
    params = load_network_params(rc.snapshot, "analyze");
  }

  const ParentKind which = parent_kind_from_string(rc.parents);
  const LatentComponent component = latent_component_from_string(rc.component);
  const CategorizedParents cats = categorize_parents(ds, which);

  const fs::path out = prepare_out_dir(rc);
  bind.write_resolved(out / "run_config.txt");

  std::string categories = "parent_id,marginal_mean,tercile\n";
  const auto& ids = which == ParentKind::inbreds ? ds.inbred_ids : ds.tester_ids;
  for (const auto& cat : cats.categories) {
    categories += cat.id + "," + format_double(cat.marginal_mean) + "," +
                  to_string(cat.tercile) + "\n";
  }
  write_text_file(out / "categories.csv", categories);
  if (!cats.excluded.empty()) {
    std::cerr << "analyze: " << cats.excluded.size()
              << " parent(s) have no observations and were left uncategorized\n";
  }

  std::vector<std::string> selected;
  if (rc.per_category > 0) {
    selected = sample_per_tercile(cats, ids, rc.per_category, derive_seed(rc.seed, kSelectSalt));
  }
  const LatentExport latents = collect_latents(params, ds, which, component, selected);
  write_latents_csv(latents, (out / "latents.csv").string());
  std::cout << (out / "latents.csv").string() << ": " << latents.rows.rows() << " " << rc.parents
            << " (" << rc.component << " component, " << latents.rows.cols() << " dims)\n";

  if (rc.tsne) {
    TsneConfig tcfg;
    tcfg.perplexity = rc.perplexity;
    tcfg.iterations = rc.tsne_iterations;
    tcfg.learning_rate = rc.tsne_learning_rate;
    tcfg.seed = rc.seed;
    const TsneResult embedded = tsne_embed(latents.rows, tcfg);
    write_tsne_csv(latents, embedded.embedding, (out / "tsne.csv").string());
    std::string kl = "iteration,kl\n";
    for (std::size_t i = 0; i < embedded.kl_history.size(); ++i) {
      kl += std::to_string(i + 1) + "," + format_double(embedded.kl_history[i]) + "\n";
    }
    write_text_file(out / "tsne_kl.csv", kl);
    std::cout << (out / "tsne.csv").string() << ": " << latents.rows.rows()
              << " points, final kl " << format_double(embedded.kl_history.back()) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  const std::string command = argv[1];
  if (command == "help" || command == "-h" || command == "--help") {
    std::cout << kUsage;
    return 0;
  }
  try {
    if (command == "generate") return cmd_generate(argc - 1, argv + 1);
    if (command == "train") return cmd_train(argc - 1, argv + 1);
    if (command == "evaluate") return cmd_evaluate(argc - 1, argv + 1);
    if (command == "predict-matrix") return cmd_predict_matrix(argc - 1, argv + 1);
    if (command == "analyze") return cmd_analyze(argc - 1, argv + 1);
    std::cerr << "crossyield: unknown command `" << command << "`\n\n" << kUsage;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "crossyield: " << e.what() << "\n";
    return 1;
  }
}
