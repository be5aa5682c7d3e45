#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fkt/common.hpp"

namespace fkt {

/// Layer widths. The production architecture is input -> 1024 -> 512 for the
/// generator and 512 -> 512 -> C for the classifier; tests shrink these to
/// keep finite-difference sweeps over every parameter tractable.
struct NetworkDims {
  int input = 0;
  int hidden = 1024;
  int feature = 512;
  int cls_hidden = 512;
  int classes = 0;

  void validate() const;
  bool operator==(const NetworkDims&) const = default;
};

struct GeneratorParams {
  Matrix w1;  // input x hidden
  Vector b1;
  Matrix w2;  // hidden x feature
  Vector b2;
};

struct ClassifierParams {
  Matrix w1;  // feature x cls_hidden
  Vector b1;
  Matrix w2;  // cls_hidden x classes
  Vector c2;
};

struct NetworkParams {
  NetworkDims dims;
  GeneratorParams gen;
  ClassifierParams cls;
};

/// Gradient buffers shaped exactly like the parameters.
struct NetworkGrads {
  GeneratorParams gen;
  ClassifierParams cls;
};

NetworkGrads zero_grads(const NetworkDims& dims);

/// Uniform fan-based initialization (biases zero), deterministic per seed.
NetworkParams init_params(const NetworkDims& dims, std::uint64_t seed);

/// Visit the eight parameter blocks in a fixed order. `fn` receives
/// (name, params_ptr, grads_ptr, length, belongs_to_generator).
template <typename Fn>
void for_each_block(NetworkParams& p, const NetworkGrads& g, Fn&& fn) {
  fn("gen.w1", p.gen.w1.data(), g.gen.w1.data(), p.gen.w1.size(), true);
  fn("gen.b1", p.gen.b1.data(), g.gen.b1.data(), p.gen.b1.size(), true);
  fn("gen.w2", p.gen.w2.data(), g.gen.w2.data(), p.gen.w2.size(), true);
  fn("gen.b2", p.gen.b2.data(), g.gen.b2.data(), p.gen.b2.size(), true);
  fn("cls.w1", p.cls.w1.data(), g.cls.w1.data(), p.cls.w1.size(), false);
  fn("cls.b1", p.cls.b1.data(), g.cls.b1.data(), p.cls.b1.size(), false);
  fn("cls.w2", p.cls.w2.data(), g.cls.w2.data(), p.cls.w2.size(), false);
  fn("cls.c2", p.cls.c2.data(), g.cls.c2.data(), p.cls.c2.size(), false);
}

// --- forward passes ---------------------------------------------------------

struct GenCache {
  Matrix pre1;      // rows x hidden, pre-activation
  Matrix act1;      // relu(pre1)
  Matrix features;  // rows x feature
};

struct ClsCache {
  Matrix pre1;    // rows x cls_hidden
  Matrix act1;
  Matrix logits;  // rows x classes
  Matrix probs;   // row-stochastic
};

GenCache forward_generator_batch(const NetworkParams& params, const Matrix& z);
ClsCache forward_classifier_batch(const NetworkParams& params, const Matrix& features);

/// f = W2 relu(W1 z + b1) + b2 for one embedding; errors on non-finite output.
Vector forward_generator(const NetworkParams& params, const Vector& z);

/// Softmax probabilities of the neural head for one feature vector.
Vector predict_neural(const NetworkParams& params, const Vector& f);
Matrix neural_probabilities(const NetworkParams& params, const Matrix& features);

// --- prototype head ---------------------------------------------------------

/// Per-class mean feature vectors. A class is defined when at least one
/// sample contributed; undefined classes are flagged, never zero-filled.
struct PrototypeTable {
  Matrix mu;                 // classes x feature
  std::vector<long> counts;  // contributors per class
  bool amended = false;

  int classes() const { return static_cast<int>(mu.rows()); }
  bool defined(int c) const { return counts[static_cast<std::size_t>(c)] > 0; }
  bool fully_defined() const;
};

/// softmax(tau * cos(f, mu_c)); scale-invariant in f. Errors on a zero-norm
/// feature or prototype, or on any undefined class.
Vector predict_prototype(const PrototypeTable& table, const Vector& f, double tau);
Matrix prototype_probabilities(const PrototypeTable& table, const Matrix& features, double tau);

// --- supervised loss and gradients ------------------------------------------

struct CrossEntropy {
  double value = 0.0;
  Matrix dlogits;     // gradient w.r.t. logits, already 1/n scaled
  long clamped = 0;   // rows whose probability hit the 1e-12 log clamp
};

CrossEntropy cross_entropy(const Matrix& probs, const std::vector<int>& labels);

struct ClassifierBackward {
  ClassifierParams grads;
  Matrix dfeatures;  // gradient flowing back into the generator output
};

ClassifierBackward backward_classifier(const NetworkParams& params, const ClsCache& cache,
                                       const Matrix& features, const Matrix& dlogits);
GeneratorParams backward_generator(const NetworkParams& params, const GenCache& cache,
                                   const Matrix& z, const Matrix& dfeatures);

struct SupervisedLoss {
  double value = 0.0;
  NetworkGrads grads;
  long clamped = 0;
};

/// Mean cross-entropy of the neural head over a labeled batch, with
/// reverse-mode gradients for every generator and classifier parameter.
SupervisedLoss supervised_loss(const Matrix& z, const std::vector<int>& labels,
                               const NetworkParams& params);

/// Loss value alone (the re-evaluation path used by finite differences).
double supervised_loss_value(const Matrix& z, const std::vector<int>& labels,
                             const NetworkParams& params);

// --- optimizer ---------------------------------------------------------------

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Vector> m;      // first moments, one entry per block
  std::vector<Vector> v;      // second moments
  std::vector<long> steps;    // per-block step counters

  static OptimizerState create(const NetworkParams& params);
};

enum class UpdateScope { All, GeneratorOnly };

/// Bias-corrected Adam over the selected blocks. Errors on a non-finite
/// gradient, naming the offending block.
void adam_step(NetworkParams& params, const NetworkGrads& grads, OptimizerState& state,
               UpdateScope scope = UpdateScope::All);

// --- checkpointing ------------------------------------------------------------

struct ModelState {
  NetworkParams net;
  PrototypeTable prototypes;
  OptimizerState opt;
  std::uint64_t seed = 0;
  long epochs_completed = 0;
  double tau = 10.0;
};

/// Text checkpoint; save/load round-trips bitwise.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace fkt
