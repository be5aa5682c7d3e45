#pragma once

#include <string>
#include <vector>

#include "fkt/common.hpp"
#include "fkt/graph.hpp"
#include "fkt/rng.hpp"

namespace fkt {

enum class Provenance { Real, EpSource, KpCross, Mix };

std::string to_string(Provenance p);

struct AugmentationConfig {
  double beta_a = 2.0;
  double beta_b = 2.0;
  int mix_count = 5;  // k mixup samples per minority seed row
};

/// Which synthetic sets join the training pool (the CDA ablation switches).
struct AugmentSelection {
  bool include_ep = true;
  bool include_kp = true;
  bool include_mix = true;
};

/// Real rows plus the synthetic EP/KP/MIX sets, stored row-major with
/// per-row provenance. MIX rows record the seed row and the drawn gamma.
struct AugmentedPool {
  Matrix embeddings;
  std::vector<int> labels;
  std::vector<Provenance> provenance;
  std::vector<Index> seed_row;   // originating real row (self for Real)
  std::vector<double> gamma;     // meaningful for Mix rows only, else 0
  Index n_real = 0, n_ep = 0, n_kp = 0, n_mix = 0;
  int class_count = 0;

  Index rows() const { return embeddings.rows(); }
};

/// One Beta(a, b) draw from the deterministic generator.
double sample_beta(double a, double b, Rng& rng);

/// (1-gamma)*z_s + gamma*z_o.
Vector mix(const Vector& z_s, const Vector& z_o, double gamma);

/// Assemble real + EP + KP + MIX. MIX pairs ep[i] with kp[i] (same seed row)
/// and draws an independent gamma per sample. Selection switches drop whole
/// sets; parents are still used for MIX even when their set is dropped.
AugmentedPool build_augmented_pool(const Matrix& z_real, const std::vector<int>& labels_real,
                                   int class_count, const PropagatedSet& ep,
                                   const PropagatedSet& kp, const AugmentationConfig& cfg,
                                   Rng& rng, const AugmentSelection& select = {});

}  // namespace fkt
