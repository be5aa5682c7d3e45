#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fkt/common.hpp"
#include "fkt/dataset.hpp"
#include "fkt/network.hpp"

namespace fkt {

/// Minority / majority / overall target accuracies with per-class counts.
struct MetricsReport {
  bool present = false;       // false when no labeled target was available
  bool has_minority = false;  // a_f defined
  bool has_majority = false;  // a_m defined
  double a_f = 0.0;           // percent
  double a_m = 0.0;
  double a_o = 0.0;
  long correct_f = 0, correct_m = 0;
  long n_f = 0, n_m = 0;
  std::vector<long> per_class_correct;
  std::vector<long> per_class_total;

  long n_total() const { return n_f + n_m; }
  long correct_total() const { return correct_f + correct_m; }
};

struct EvalOptions {
  bool deploy_mode = false;       // score every row with the prototype head
  bool classwise_overall = false; // a_o as mean of per-class accuracies
};

/// Label-routed hybrid protocol: rows whose true class is minority are scored
/// by the prototype head, the rest by the neural head; both heads always
/// predict over the full label space. Read-only in the model.
MetricsReport evaluate(const NetworkParams& params, const PrototypeTable& prototypes,
                       double tau, const EmbeddingDataset& target, const SplitSpec& split,
                       const EvalOptions& options = {});

/// One-row TSV (with header): task, seed, epoch, a_f, a_m, a_o, per-class.
std::string metrics_tsv(const std::string& task, std::uint64_t seed, long epoch,
                        const MetricsReport& report);

}  // namespace fkt
