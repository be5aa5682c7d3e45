#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fkt/common.hpp"

namespace fkt {

enum class Domain { Source, Target };

std::string to_string(Domain d);

/// A domain-tagged matrix of embedding rows with optional integer labels.
/// Source datasets are always fully labeled; target labels, when present,
/// are only ever consulted by evaluation.
struct EmbeddingDataset {
  Domain domain = Domain::Source;
  Matrix embeddings;         // n x d
  std::vector<int> labels;   // size n when labeled, empty when unlabeled
  int class_count = 0;

  Index rows() const { return embeddings.rows(); }
  Index dim() const { return embeddings.cols(); }
  bool labeled() const { return !labels.empty(); }

  /// Throws Error("dataset", ...) on any invariant violation.
  void validate() const;
};

/// P-way Q-shot split: which classes are scarce and how many rows each keeps.
struct SplitSpec {
  std::vector<int> minority_classes;  // Q^f, order given by the caller
  int shots = 1;                      // Q

  int ways() const { return static_cast<int>(minority_classes.size()); }
  bool is_minority(int c) const;
};

/// Row indices produced by apply_split. Selected minority rows plus dropped
/// minority rows plus majority rows partition the input.
struct SplitResult {
  std::vector<Index> majority_rows;
  std::vector<Index> minority_rows;
  std::vector<Index> dropped_minority_rows;

  /// Majority and selected minority rows, ascending (the training view).
  std::vector<Index> kept_rows() const;
};

struct SyntheticShift {
  double angle = 0.0;        // orthogonal mixing angle, radians
  double translation = 0.0;  // magnitude of the fixed offset
  double noise_sd = 0.0;     // additive Gaussian noise on target rows
};

/// Desk-scale stand-in for a real adaptation task: Gaussian class clusters,
/// with the target pushed through a seeded orthogonal blend + offset + noise.
struct SyntheticTaskSpec {
  int class_count = 0;
  int dim = 0;
  int per_class_source = 0;
  int per_class_target = 0;
  std::vector<int> minority_classes;
  int shots = 1;
  SyntheticShift shift;
  double separation = 1.0;
  std::uint64_t seed = 0;
};

/// Parse an embedding file. Errors carry the 1-based line number.
EmbeddingDataset load_dataset(const std::string& path);

/// Write the embedding text format; parse-then-serialize round-trips bitwise.
void save_dataset(const EmbeddingDataset& ds, const std::string& path);
std::string serialize_dataset(const EmbeddingDataset& ds);

/// Q-shot subsampling of the minority classes, deterministic per seed.
/// Minority classes with fewer than Q rows keep all of them.
SplitResult apply_split(const EmbeddingDataset& ds, const SplitSpec& spec,
                        std::uint64_t seed);

/// Labeled source/target pair drawn from the spec; byte-identical per seed.
std::pair<EmbeddingDataset, EmbeddingDataset> generate_synthetic(
    const SyntheticTaskSpec& spec);

}  // namespace fkt
