// jmd: command-line front end.
//
//   jmd synth   --seed S --out DIR [--heatmap] [--config F | --auto-tune] [--export-task K]
//   jmd diffuse --main-pred F --main-feat F {--ref-pred F --ref-feat F --couple F}...
//               --val-pairs F [--config F | --auto-tune] --out F
//   jmd eval    --pred F --pairs F
//   jmd train   --feat F --pairs F [--val-pairs F] [--lambda L]... --out F
//
// Exit codes: 0 success, 2 I/O, 3 config or usage, 4 validation or shape.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "jmd/error.hpp"
#include "jmd/io.hpp"
#include "jmd/joint.hpp"
#include "jmd/rank.hpp"
#include "jmd/synthetic.hpp"
#include "jmd/tune.hpp"

namespace {

namespace io = jmd::io;
namespace fs = std::filesystem;

constexpr int kExitIo = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInvalid = 4;

jmd::RankPairs load_rank_pairs(const std::string& path, jmd::Index n) {
  jmd::RankPairs pairs{io::read_index_pairs(path), n};
  for (const auto& [i, j] : pairs.pairs)
    if (i >= n || j >= n || i == j)
      throw io::FormatError(path + ": pair (" + std::to_string(i) + "," + std::to_string(j) + ") invalid for " + std::to_string(n) +
                            " instances");
  return pairs;
}

void print_accuracy(double acc) { std::cout << "accuracy=" << io::format_shortest(acc) << "\n"; }

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string out;
  bool heatmap = false;
  std::string config;
  bool auto_tune = false;
  std::optional<int> export_task;
};

void export_task(const jmd::ToyWorld& world, int task, const jmd::DiffusionConfig& cfg, const fs::path& dir) {
  const jmd::ProblemInstance inst = jmd::toy_problem(world, task);
  fs::create_directories(dir);
  io::write_file_atomic(dir / "main_pred.txt", io::predictions_text(inst.main_predictions));
  io::write_file_atomic(dir / "main_feat.csv", io::features_text(inst.main_features));
  io::write_file_atomic(dir / "val_pairs.txt", io::pairs_text(inst.validation.pairs));
  io::write_file_atomic(dir / "config.txt", io::config_text(cfg));
  for (size_t k = 0; k < inst.refs.size(); ++k) {
    const std::string stem = "ref" + std::to_string(k);
    io::write_file_atomic(dir / (stem + "_pred.txt"), io::predictions_text(inst.refs[k].predictions));
    io::write_file_atomic(dir / (stem + "_feat.csv"), io::features_text(inst.refs[k].features));
    io::write_file_atomic(dir / (stem + "_couple.txt"), io::pairs_text(inst.refs[k].coupling.pairs));
  }
}

int run_synth(const SynthArgs& a) {
  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw io::IoError("cannot create output directory " + a.out);

  std::optional<jmd::DiffusionConfig> cfg = jmd::DiffusionConfig{};
  if (!a.config.empty()) cfg = io::read_config(a.config);
  if (a.auto_tune) cfg.reset();

  jmd::ToyConfig toy;
  toy.seed = a.seed;
  const jmd::ToyWorld world = jmd::generate_toy_world(toy);
  const jmd::ToyExperimentResult r = jmd::run_toy_experiment(world, cfg);

  io::write_file_atomic(out / "gt.csv", io::features_text(r.ground_truth.values));
  io::write_file_atomic(out / "initial.csv", io::features_text(r.initial.values));
  io::write_file_atomic(out / "refined.csv", io::features_text(r.refined.values));
  if (a.heatmap) {
    io::write_file_atomic(out / "gt.pgm", io::pgm_bytes(r.ground_truth.values));
    io::write_file_atomic(out / "initial.pgm", io::pgm_bytes(r.initial.values));
    io::write_file_atomic(out / "refined.pgm", io::pgm_bytes(r.refined.values));
  }
  if (a.export_task) {
    const int t = *a.export_task;
    if (t < 0 || t >= toy.n_tasks) throw jmd::Error(jmd::ErrorCode::IndexOutOfRange, "--export-task out of range");
    export_task(world, t, r.configs[static_cast<size_t>(t)], out / ("task" + std::to_string(t)));
  }

  for (size_t k = 0; k < r.tasks.size(); ++k) {
    const auto& t = r.tasks[k];
    std::cout << "task=" << k << " outer_iterations=" << t.outer_iterations << " metric_initial=" << io::format_shortest(t.metric_initial)
              << " metric_refined=" << io::format_shortest(t.metric_refined) << "\n";
    if (t.degenerate_steps > 0) std::cerr << "warning: task " << k << " hit " << t.degenerate_steps << " degenerate f-steps\n";
  }
  return 0;
}

// ---- diffuse --------------------------------------------------------------

struct DiffuseArgs {
  std::string main_pred, main_feat, val_pairs, config, out;
  std::vector<std::string> ref_pred, ref_feat, couple;
  bool auto_tune = false;
};

int run_diffuse(const DiffuseArgs& a) {
  if (a.ref_pred.empty()) throw io::FormatError("at least one reference required");
  if (a.ref_feat.size() != a.ref_pred.size() || a.couple.size() != a.ref_pred.size())
    throw io::FormatError("each reference needs --ref-pred, --ref-feat and --couple");

  jmd::DiffusionConfig cfg = a.config.empty() ? jmd::DiffusionConfig{} : io::read_config(a.config);

  jmd::ProblemInstance inst;
  inst.main_predictions = io::read_predictions(a.main_pred);
  inst.main_features = io::read_features(a.main_feat);
  const jmd::Index n = inst.main_predictions.size();
  if (inst.main_features.rows() != n)
    throw io::FormatError(a.main_feat + ": " + std::to_string(inst.main_features.rows()) + " rows but " + a.main_pred + " has " +
                          std::to_string(n) + " predictions");
  inst.validation.n = n;
  if (!a.val_pairs.empty()) inst.validation = load_rank_pairs(a.val_pairs, n);

  for (size_t k = 0; k < a.ref_pred.size(); ++k) {
    jmd::ReferenceData ref;
    ref.predictions = io::read_predictions(a.ref_pred[k]);
    ref.features = io::read_features(a.ref_feat[k]);
    if (ref.features.rows() != ref.predictions.size())
      throw io::FormatError(a.ref_feat[k] + ": " + std::to_string(ref.features.rows()) + " rows but " + a.ref_pred[k] + " has " +
                            std::to_string(ref.predictions.size()) + " predictions");
    ref.coupling = jmd::CouplingLabels{io::read_index_pairs(a.couple[k]), n, ref.predictions.size()};
    try {
      ref.coupling.validate();
    } catch (const jmd::Error& e) {
      throw io::FormatError(a.couple[k] + ": " + e.what());
    }
    inst.refs.push_back(std::move(ref));
  }

  if (a.auto_tune) cfg = jmd::tune_hyperparameters(inst, jmd::TuneGrid{}, cfg);
  const jmd::JointResult r = jmd::run_joint_diffusion(inst, cfg);
  io::write_file_atomic(a.out, io::predictions_text(r.refined));
  if (r.state.degenerate_steps > 0) std::cerr << "warning: " << r.state.degenerate_steps << " degenerate f-steps\n";
  if (!inst.validation.empty()) print_accuracy(jmd::ranking_accuracy(r.refined, inst.validation));
  return 0;
}

// ---- eval / train ---------------------------------------------------------

int run_eval(const std::string& pred_path, const std::string& pairs_path) {
  const jmd::Vector pred = io::read_predictions(pred_path);
  const jmd::RankPairs pairs = load_rank_pairs(pairs_path, pred.size());
  if (pairs.empty()) throw io::FormatError(pairs_path + ": no pairs");
  print_accuracy(jmd::ranking_accuracy(pred, pairs));
  return 0;
}

struct TrainArgs {
  std::string feat, pairs, val_pairs, out;
  std::vector<double> lambda;
};

int run_train(const TrainArgs& a) {
  const jmd::Matrix x = io::read_features(a.feat);
  const jmd::RankPairs train = load_rank_pairs(a.pairs, x.rows());
  if (train.empty()) throw io::FormatError(a.pairs + ": no pairs");
  jmd::RankPairs val{{}, x.rows()};
  if (!a.val_pairs.empty()) val = load_rank_pairs(a.val_pairs, x.rows());

  std::vector<double> grid = a.lambda;
  if (grid.empty()) grid.assign(std::begin(jmd::kDefaultLambdaGrid), std::end(jmd::kDefaultLambdaGrid));
  if (grid.size() > 1 && val.empty()) throw io::FormatError("--val-pairs required to choose among several lambda values");

  const jmd::LinearRanker ranker = jmd::train_linear_ranker(x, train, grid, val);
  const jmd::Vector pred = ranker.predict(x);
  io::write_file_atomic(a.out, io::predictions_text(pred));
  if (!val.empty()) print_accuracy(jmd::ranking_accuracy(pred, val));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint manifold diffusion for combining predictors on decoupled observations"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Run the twelve-task synthetic experiment and write metric matrices");
  s->add_option("--seed", synth.seed, "World seed")->default_val(0);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_flag("--heatmap", synth.heatmap, "Also write PGM heatmaps");
  auto* synth_cfg = s->add_option("--config", synth.config, "Diffusion config file");
  s->add_flag("--auto-tune", synth.auto_tune, "Tune hyperparameters per task")->excludes(synth_cfg);
  s->add_option("--export-task", synth.export_task, "Also write the problem files of this task (0-based)");

  DiffuseArgs diffuse;
  auto* d = app.add_subcommand("diffuse", "Refine a main predictor against decoupled references");
  d->add_option("--main-pred", diffuse.main_pred)->required();
  d->add_option("--main-feat", diffuse.main_feat)->required();
  d->add_option("--ref-pred", diffuse.ref_pred);
  d->add_option("--ref-feat", diffuse.ref_feat);
  d->add_option("--couple", diffuse.couple);
  d->add_option("--val-pairs", diffuse.val_pairs);
  d->add_option("--config", diffuse.config);
  d->add_flag("--auto-tune", diffuse.auto_tune);
  d->add_option("--out", diffuse.out)->required();

  std::string eval_pred, eval_pairs;
  auto* e = app.add_subcommand("eval", "Ranking accuracy of predictions on labeled pairs");
  e->add_option("--pred", eval_pred)->required();
  e->add_option("--pairs", eval_pairs)->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a linear ranker with the squared margin loss");
  t->add_option("--feat", train.feat)->required();
  t->add_option("--pairs", train.pairs)->required();
  t->add_option("--val-pairs", train.val_pairs);
  t->add_option("--lambda", train.lambda, "Regularization strength(s)");
  t->add_option("--out", train.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);  // prints the usage message
    return kExitConfig;
  }

  try {
    if (*s) return run_synth(synth);
    if (*d) return run_diffuse(diffuse);
    if (*e) return run_eval(eval_pred, eval_pairs);
    if (*t) return run_train(train);
  } catch (const io::IoError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitIo;
  } catch (const io::ConfigError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const io::FormatError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const jmd::Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const fs::filesystem_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitIo;
  }
  return 0;
}
