// Command-line front end: synth / train / eval / augment.
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fkt/align.hpp"
#include "fkt/augment.hpp"
#include "fkt/dataset.hpp"
#include "fkt/eval.hpp"
#include "fkt/graph.hpp"
#include "fkt/network.hpp"
#include "fkt/report.hpp"
#include "fkt/rng.hpp"
#include "fkt/threads.hpp"
#include "fkt/trainer.hpp"

namespace {

struct SynthOptions {
  std::string out_source;
  std::string out_target;
  fkt::SyntheticTaskSpec spec;
};

void run_synth(const SynthOptions& opt) {
  auto [source, target] = fkt::generate_synthetic(opt.spec);
  fkt::save_dataset(source, opt.out_source);
  fkt::save_dataset(target, opt.out_target);
  std::cerr << "wrote " << opt.out_source << " (" << source.rows() << " rows) and "
            << opt.out_target << " (" << target.rows() << " rows)\n";
}

struct TrainOptions {
  std::string source_path;
  std::string target_path;
  std::vector<int> minority;
  int shots = 1;
  fkt::Hyperparams hp;
  std::string mode = "global";
  std::string sigma_mode = "var-d2";
  bool no_row_normalize = false;
  bool no_cpa = false, no_cpa_intra = false, no_cpa_inter = false;
  bool no_cda = false, no_cda_s = false, no_cda_t = false, no_cda_mix = false;
  std::string report_path = "train_report.jsonl";
  std::string metrics_path = "metrics.tsv";
  std::string checkpoint_path = "checkpoint.fkt";
  std::string task = "task";
  bool timing = false;
};

fkt::AblationFlags flags_from(const TrainOptions& opt) {
  fkt::AblationFlags flags;
  flags.use_cpa = !opt.no_cpa;
  flags.use_cpa_intra = !opt.no_cpa_intra;
  flags.use_cpa_inter = !opt.no_cpa_inter;
  flags.use_cda = !opt.no_cda;
  flags.use_cda_s = !opt.no_cda_s;
  flags.use_cda_t = !opt.no_cda_t;
  flags.use_cda_mix = !opt.no_cda_mix;
  flags.normalize();
  return flags;
}

void apply_mode_strings(fkt::Hyperparams& hp, const std::string& mode,
                        const std::string& sigma_mode, bool no_row_normalize) {
  hp.mode = (mode == "episodic") ? fkt::TrainMode::Episodic : fkt::TrainMode::Global;
  hp.sigma_mode = (sigma_mode == "var-d") ? fkt::SigmaMode::VarianceOfDistances
                                          : fkt::SigmaMode::VarianceOfSquaredDistances;
  hp.row_normalize = !no_row_normalize;
}

void run_train(const TrainOptions& opt) {
  fkt::Hyperparams hp = opt.hp;
  apply_mode_strings(hp, opt.mode, opt.sigma_mode, opt.no_row_normalize);

  const fkt::EmbeddingDataset source = fkt::load_dataset(opt.source_path);
  const fkt::EmbeddingDataset target = fkt::load_dataset(opt.target_path);
  fkt::SplitSpec split{opt.minority, opt.shots};

  fkt::TrainResult result = fkt::train(source, target, split, hp, flags_from(opt));
  for (const std::string& w : result.stats.warnings) std::cerr << "warning: " << w << "\n";
  if (result.stats.log_clamps > 0)
    std::cerr << "warning: " << result.stats.log_clamps
              << " log() inputs clamped at 1e-12\n";

  fkt::write_text_file(opt.report_path, fkt::report_jsonl(result.report, opt.timing));
  fkt::write_text_file(opt.metrics_path,
                       fkt::metrics_tsv(opt.task, hp.seed, hp.train_epochs,
                                        result.report.final_metrics));
  fkt::save_checkpoint(result.model, opt.checkpoint_path);

  const fkt::MetricsReport& m = result.report.final_metrics;
  if (m.present) {
    std::cerr << "final metrics: a_f="
              << (m.has_minority ? fkt::format_double(m.a_f) : "-") << " a_m="
              << (m.has_majority ? fkt::format_double(m.a_m) : "-")
              << " a_o=" << fkt::format_double(m.a_o) << "\n";
  }
}

struct EvalOptionsCli {
  std::string checkpoint_path;
  std::string target_path;
  std::vector<int> minority;
  bool deploy_mode = false;
  bool classwise_overall = false;
  std::string out_path;  // empty -> stdout
  std::string task = "task";
};

void run_eval(const EvalOptionsCli& opt) {
  const fkt::ModelState state = fkt::load_checkpoint(opt.checkpoint_path);
  const fkt::EmbeddingDataset target = fkt::load_dataset(opt.target_path);
  if (target.dim() != state.net.dims.input)
    throw fkt::Error("eval", "checkpoint expects dimension " +
                                 std::to_string(state.net.dims.input) + ", target has " +
                                 std::to_string(target.dim()));
  fkt::SplitSpec split{opt.minority, 1};
  fkt::EvalOptions options{opt.deploy_mode, opt.classwise_overall};
  const fkt::MetricsReport report =
      fkt::evaluate(state.net, state.prototypes, state.tau, target, split, options);
  const std::string tsv =
      fkt::metrics_tsv(opt.task, state.seed, state.epochs_completed, report);
  if (opt.out_path.empty())
    std::cout << tsv;
  else
    fkt::write_text_file(opt.out_path, tsv);
}

struct AugmentOptions {
  std::string source_path;
  std::string target_path;
  std::vector<int> minority;
  int shots = 1;
  std::uint64_t seed = 0;
  double alpha = 0.2;
  int mix_count = 5;
  double beta_a = 2.0;
  double beta_b = 2.0;
  std::string sigma_mode = "var-d2";
  bool no_row_normalize = false;
  std::string out_path = "augmented.fkt";
};

void run_augment(const AugmentOptions& opt) {
  const fkt::EmbeddingDataset source = fkt::load_dataset(opt.source_path);
  const fkt::EmbeddingDataset target = fkt::load_dataset(opt.target_path);
  const fkt::SplitSpec split{opt.minority, opt.shots};
  const fkt::SplitResult sr =
      fkt::apply_split(source, split, fkt::Rng::derive(opt.seed, "split"));
  const std::vector<fkt::Index> kept = sr.kept_rows();

  fkt::Matrix z(static_cast<fkt::Index>(kept.size()), source.dim());
  std::vector<int> labels;
  labels.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    z.row(static_cast<fkt::Index>(i)) = source.embeddings.row(kept[i]);
    labels.push_back(source.labels[static_cast<std::size_t>(kept[i])]);
  }
  std::vector<fkt::Index> minority_rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (split.is_minority(labels[i])) minority_rows.push_back(static_cast<fkt::Index>(i));

  fkt::GraphConfig gcfg;
  gcfg.alpha = opt.alpha;
  gcfg.row_normalize = !opt.no_row_normalize;
  gcfg.sigma_mode = (opt.sigma_mode == "var-d")
                        ? fkt::SigmaMode::VarianceOfDistances
                        : fkt::SigmaMode::VarianceOfSquaredDistances;

  fkt::PropagatedSet ep, kp;
  if (!minority_rows.empty()) {
    const fkt::PropagationGraph gs = fkt::build_source_graph(z, gcfg);
    ep = fkt::propagate_within_source(gs, z, labels, minority_rows, gcfg);
    fkt::Matrix z_min(static_cast<fkt::Index>(minority_rows.size()), z.cols());
    std::vector<int> y_min;
    for (std::size_t i = 0; i < minority_rows.size(); ++i) {
      z_min.row(static_cast<fkt::Index>(i)) = z.row(minority_rows[i]);
      y_min.push_back(labels[static_cast<std::size_t>(minority_rows[i])]);
    }
    const fkt::PropagationGraph go = fkt::build_cross_graph(z_min, target.embeddings, gcfg);
    kp = fkt::propagate_cross_domain(go, z_min, y_min, target.embeddings, gcfg);
    kp.seed_rows = minority_rows;
  } else {
    ep.embeddings.resize(0, z.cols());
    kp.embeddings.resize(0, z.cols());
  }

  fkt::Rng rng(fkt::Rng::derive(opt.seed, "mix"));
  const fkt::AugmentationConfig acfg{opt.beta_a, opt.beta_b, opt.mix_count};
  const fkt::AugmentedPool pool =
      fkt::build_augmented_pool(z, labels, source.class_count, ep, kp, acfg, rng, {});

  std::ostringstream out;
  out << "#fkt v1 n=" << pool.rows() << " d=" << pool.embeddings.cols()
      << " c=" << pool.class_count << " domain=source\n";
  for (fkt::Index i = 0; i < pool.rows(); ++i) {
    out << pool.labels[static_cast<std::size_t>(i)] << '\t';
    for (fkt::Index j = 0; j < pool.embeddings.cols(); ++j) {
      if (j > 0) out << ' ';
      out << fkt::format_double(pool.embeddings(i, j));
    }
    out << '\t' << fkt::to_string(pool.provenance[static_cast<std::size_t>(i)]) << '\n';
  }
  fkt::write_text_file(opt.out_path, out.str());
  std::cerr << "wrote " << opt.out_path << " (" << pool.n_real << " real, " << pool.n_ep
            << " EP, " << pool.n_kp << " KP, " << pool.n_mix << " MIX)\n";
}

void add_hyperparam_options(CLI::App* cmd, TrainOptions& opt) {
  cmd->add_option("--alpha", opt.hp.alpha, "Propagator scaling factor in (0,1)")
      ->capture_default_str();
  cmd->add_option("--lambda", opt.hp.lambda, "Alignment weight")->capture_default_str();
  cmd->add_option("--lr", opt.hp.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--pretrain-lr", opt.hp.pretrain_lr, "Pretraining learning rate")
      ->capture_default_str();
  cmd->add_option("--pretrain-epochs", opt.hp.pretrain_epochs, "Source-only pretraining epochs")
      ->capture_default_str();
  cmd->add_option("--epochs", opt.hp.train_epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--k", opt.hp.mix_count, "Mixup samples per minority seed row")
      ->capture_default_str();
  cmd->add_option("--beta-a", opt.hp.beta_a, "Beta distribution a")->capture_default_str();
  cmd->add_option("--beta-b", opt.hp.beta_b, "Beta distribution b")->capture_default_str();
  cmd->add_option("--tau", opt.hp.tau, "Cosine temperature of the prototype head")
      ->capture_default_str();
  cmd->add_option("--pseudo-confidence", opt.hp.pseudo_confidence,
                  "Pseudo-label confidence threshold (0 disables)")
      ->capture_default_str();
  cmd->add_option("--mode", opt.mode, "Training mode")
      ->check(CLI::IsMember({"global", "episodic"}))
      ->capture_default_str();
  cmd->add_option("--episode-p", opt.hp.episode_p, "Majority samples per class per episode")
      ->capture_default_str();
  cmd->add_option("--episode-q", opt.hp.episode_q, "Minority samples per class per episode")
      ->capture_default_str();
  cmd->add_option("--episode-targets", opt.hp.episode_targets, "Target samples per episode")
      ->capture_default_str();
  cmd->add_option("--episodes-per-epoch", opt.hp.episodes_per_epoch,
                  "Episodes per epoch (0 = derive from majority coverage)")
      ->capture_default_str();
  cmd->add_flag("--epoch-alternation", opt.hp.epoch_level_alternation,
                "Alternate A/B at epoch level instead of per iteration");
  cmd->add_option("--hidden", opt.hp.hidden, "Generator hidden width")->capture_default_str();
  cmd->add_option("--feature", opt.hp.feature, "Generator output width")->capture_default_str();
  cmd->add_option("--cls-hidden", opt.hp.cls_hidden, "Classifier hidden width")
      ->capture_default_str();
  cmd->add_option("--sigma-mode", opt.sigma_mode,
                  "Bandwidth statistic: var-d2 = Var(d^2), var-d = Var(d)")
      ->check(CLI::IsMember({"var-d2", "var-d"}))
      ->capture_default_str();
  cmd->add_flag("--no-row-normalize", opt.no_row_normalize,
                "Apply the propagator rows without normalizing them");
  cmd->add_flag("--ep-restrict-minority", opt.hp.ep_restrict_to_minority,
                "Sum within-source propagation over minority rows only");
  cmd->add_option("--seed", opt.hp.seed, "Root seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  fkt::init_threads_from_env();

  CLI::App app{"Imbalanced unsupervised domain adaptation over precomputed embeddings"};
  app.require_subcommand(1);

  // --- synth -----------------------------------------------------------------
  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic source/target task");
  synth_cmd->add_option("--out-source", synth.out_source, "Output path for the source file")
      ->required();
  synth_cmd->add_option("--out-target", synth.out_target, "Output path for the target file")
      ->required();
  synth_cmd->add_option("--classes", synth.spec.class_count, "Number of classes")->required();
  synth_cmd->add_option("--dim", synth.spec.dim, "Embedding dimension")->required();
  synth_cmd
      ->add_option("--per-class-source", synth.spec.per_class_source, "Source rows per class")
      ->required();
  synth_cmd
      ->add_option("--per-class-target", synth.spec.per_class_target, "Target rows per class")
      ->required();
  synth_cmd->add_option("--minority", synth.spec.minority_classes, "Minority class ids")
      ->delimiter(',');
  synth_cmd->add_option("--shots", synth.spec.shots, "Minority shots")->capture_default_str();
  synth_cmd->add_option("--angle", synth.spec.shift.angle, "Orthogonal mixing angle (radians)")
      ->capture_default_str();
  synth_cmd->add_option("--translation", synth.spec.shift.translation, "Translation magnitude")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.shift.noise_sd, "Additive noise stddev")
      ->capture_default_str();
  synth_cmd->add_option("--separation", synth.spec.separation, "Cluster separation scale")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Seed")->capture_default_str();
  synth_cmd->callback([&] { run_synth(synth); });

  // --- train -----------------------------------------------------------------
  TrainOptions train;
  CLI::App* train_cmd = app.add_subcommand("train", "Run the two-step training pipeline");
  train_cmd->set_config("--config", "", "key=value config file (flags override it)");
  train_cmd->allow_config_extras(CLI::config_extras_mode::error);
  train_cmd->add_option("--source", train.source_path, "Source embedding file")->required();
  train_cmd->add_option("--target", train.target_path, "Target embedding file")->required();
  train_cmd->add_option("--minority", train.minority, "Minority class ids")
      ->required()
      ->delimiter(',');
  train_cmd->add_option("--shots", train.shots, "Labeled rows kept per minority class")
      ->capture_default_str();
  add_hyperparam_options(train_cmd, train);
  train_cmd->add_flag("--no-cpa", train.no_cpa, "Disable prototype alignment");
  train_cmd->add_flag("--no-cpa-intra", train.no_cpa_intra, "Drop the class-MMD term");
  train_cmd->add_flag("--no-cpa-inter", train.no_cpa_inter, "Drop the inter-class divergence term");
  train_cmd->add_flag("--no-cda", train.no_cda, "Disable all augmentation");
  train_cmd->add_flag("--no-cda-s", train.no_cda_s, "Drop the within-source propagated set");
  train_cmd->add_flag("--no-cda-t", train.no_cda_t, "Drop the cross-domain propagated set");
  train_cmd->add_flag("--no-cda-mix", train.no_cda_mix, "Drop the mixup set");
  train_cmd->add_option("--report", train.report_path, "Per-epoch JSONL report path")
      ->capture_default_str();
  train_cmd->add_option("--metrics", train.metrics_path, "Final metrics TSV path")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint", train.checkpoint_path, "Checkpoint output path")
      ->capture_default_str();
  train_cmd->add_option("--task", train.task, "Task name recorded in the metrics TSV")
      ->capture_default_str();
  train_cmd->add_flag("--timing", train.timing,
                      "Record real wall-clock times in the report (breaks byte-for-byte "
                      "reproducibility)");
  train_cmd->callback([&] { run_train(train); });

  // --- eval ------------------------------------------------------------------
  EvalOptionsCli eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled target");
  eval_cmd->add_option("--checkpoint", eval.checkpoint_path, "Checkpoint path")->required();
  eval_cmd->add_option("--target", eval.target_path, "Labeled target embedding file")
      ->required();
  eval_cmd->add_option("--minority", eval.minority, "Minority class ids")
      ->required()
      ->delimiter(',');
  eval_cmd->add_flag("--deploy-mode", eval.deploy_mode,
                     "Score every row with the prototype head (no label routing)");
  eval_cmd->add_flag("--classwise-overall", eval.classwise_overall,
                     "Report a_o as the mean of per-class accuracies");
  eval_cmd->add_option("--out", eval.out_path, "TSV output path (default: stdout)");
  eval_cmd->add_option("--task", eval.task, "Task name recorded in the TSV")
      ->capture_default_str();
  eval_cmd->callback([&] { run_eval(eval); });

  // --- augment ---------------------------------------------------------------
  AugmentOptions augment;
  CLI::App* augment_cmd =
      app.add_subcommand("augment", "Dump the augmented pool with provenance tags");
  augment_cmd->add_option("--source", augment.source_path, "Source embedding file")->required();
  augment_cmd->add_option("--target", augment.target_path, "Target embedding file")->required();
  augment_cmd->add_option("--minority", augment.minority, "Minority class ids")
      ->required()
      ->delimiter(',');
  augment_cmd->add_option("--shots", augment.shots, "Labeled rows kept per minority class")
      ->capture_default_str();
  augment_cmd->add_option("--seed", augment.seed, "Seed")->capture_default_str();
  augment_cmd->add_option("--alpha", augment.alpha, "Propagator scaling factor")
      ->capture_default_str();
  augment_cmd->add_option("--k", augment.mix_count, "Mixup samples per minority seed row")
      ->capture_default_str();
  augment_cmd->add_option("--beta-a", augment.beta_a, "Beta distribution a")
      ->capture_default_str();
  augment_cmd->add_option("--beta-b", augment.beta_b, "Beta distribution b")
      ->capture_default_str();
  augment_cmd->add_option("--sigma-mode", augment.sigma_mode, "var-d2 or var-d")
      ->check(CLI::IsMember({"var-d2", "var-d"}))
      ->capture_default_str();
  augment_cmd->add_flag("--no-row-normalize", augment.no_row_normalize,
                        "Apply the propagator rows without normalizing them");
  augment_cmd->add_option("--out", augment.out_path, "Output path")->capture_default_str();
  augment_cmd->callback([&] { run_augment(augment); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const fkt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
