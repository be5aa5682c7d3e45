#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fkt/align.hpp"
#include "fkt/augment.hpp"
#include "fkt/common.hpp"
#include "fkt/dataset.hpp"
#include "fkt/eval.hpp"
#include "fkt/graph.hpp"
#include "fkt/network.hpp"

namespace fkt {

enum class TrainMode { Global, Episodic };

struct Hyperparams {
  double alpha = 0.2;
  double lambda = 0.1;        // 0.01 suits Office-31-like configs
  double lr = 0.001;
  double pretrain_lr = 0.0001;
  int pretrain_epochs = 2000;
  int train_epochs = 30;
  int mix_count = 5;          // k
  double beta_a = 2.0;
  double beta_b = 2.0;
  double tau = 10.0;          // cosine temperature; 1 reproduces raw cosines
  bool row_normalize = true;
  SigmaMode sigma_mode = SigmaMode::VarianceOfSquaredDistances;
  bool ep_restrict_to_minority = false;
  double pseudo_confidence = 0.0;  // 0 disables thresholding
  TrainMode mode = TrainMode::Global;
  int episode_p = 4;
  int episode_q = 4;
  int episode_targets = 64;       // e_t
  int episodes_per_epoch = 0;     // 0 = derive from majority coverage
  bool epoch_level_alternation = false;
  int hidden = 1024;
  int feature = 512;
  int cls_hidden = 512;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ablation switches mapping to the usual "w/o X" variants. Turning a group
/// off forces its members off.
struct AblationFlags {
  bool use_cpa = true;
  bool use_cpa_intra = true;
  bool use_cpa_inter = true;
  bool use_cda = true;
  bool use_cda_s = true;
  bool use_cda_t = true;
  bool use_cda_mix = true;

  void normalize();
  AugmentSelection selection() const;
  bool alignment_enabled() const { return use_cpa && (use_cpa_intra || use_cpa_inter); }
  bool augmentation_enabled() const {
    return use_cda && (use_cda_s || use_cda_t || use_cda_mix);
  }
};

/// e_s = |Q^m| * p + |Q^f| * q source rows plus e_t target rows per episode.
struct EpisodeSpec {
  int majority_classes = 0;  // |Q^m|
  int minority_classes = 0;  // |Q^f|
  int p = 1;
  int q = 1;
  int e_t = 1;

  int source_size() const { return majority_classes * p + minority_classes * q; }
};

struct EpochRecord {
  int epoch = 0;
  double m_s = 0.0;
  double m_c = 0.0;
  double m_d = 0.0;
  double objective = 0.0;  // m_s + lambda * (m_c - m_d)
  MetricsReport metrics;
  long wall_ms = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  MetricsReport final_metrics;
};

struct TrainStats {
  int source_graph_builds = 0;
  int cross_graph_builds = 0;
  long log_clamps = 0;
  std::vector<std::string> warnings;
};

struct TrainResult {
  ModelState model;
  TrainReport report;
  TrainStats stats;
};

/// Full-batch Adam on the supervised loss; params and optimizer state are
/// updated in place. state.lr is used as-is.
void pretrain(const Matrix& z, const std::vector<int>& labels, NetworkParams& params,
              OptimizerState& opt, int epochs);

/// One Adam update of generator and classifier on M_s. Returns the loss at
/// the pre-update point. Never touches prototypes.
double step_a(const AugmentedPool& pool, NetworkParams& params, OptimizerState& opt,
              long* clamp_count = nullptr);

struct StepBResult {
  double m_s = 0.0;
  double m_c = 0.0;
  double m_d = 0.0;
  bool alignment_dropped = false;  // no commonly defined class this step
};

/// One Adam update of the generator only on M_s + lambda*(M_c - M_d), terms
/// filtered by the flags. Classifier parameters are bitwise untouched.
StepBResult step_b(const AugmentedPool& pool, const Matrix& z_target,
                   const PseudoLabels& pseudo, NetworkParams& params, OptimizerState& opt,
                   const Hyperparams& hp, const AblationFlags& flags,
                   long* clamp_count = nullptr);

/// The whole pipeline: split, graphs, pretraining, per-epoch augmentation +
/// prototype refresh + A/B alternation, per-epoch metrics.
TrainResult train(const EmbeddingDataset& source, const EmbeddingDataset& target,
                  const SplitSpec& split, const Hyperparams& hp, AblationFlags flags);

}  // namespace fkt
