#pragma once

#include <utility>
#include <vector>

#include "fkt/common.hpp"

namespace fkt {

enum class SigmaMode {
  VarianceOfSquaredDistances,  // Var(d^2), the default reading
  VarianceOfDistances,         // Var(d), the alternative reading
};

struct GraphConfig {
  double alpha = 0.2;
  bool row_normalize = true;
  SigmaMode sigma_mode = SigmaMode::VarianceOfSquaredDistances;
  /// Restrict the within-source propagation sum to minority rows instead of
  /// the whole source set (off by default; the whole-set sum is the one that
  /// uses all available structure).
  bool ep_restrict_to_minority = false;
};

struct RowOrigin {
  enum class Set { Source, Target } set = Set::Source;
  Index row = 0;  // row in the originating dataset view
};

/// Similarity graph over one embedding matrix: Gaussian adjacency, the
/// degree-normalized operator D^{-1/2} A D^{-1/2}, and the diffusion
/// propagator (I - alpha*L)^{-1}.
struct PropagationGraph {
  Matrix adjacency;
  Matrix laplacian;
  Matrix propagator;
  double bandwidth = 1.0;  // sigma^2
  double alpha = 0.2;
  std::vector<RowOrigin> row_index;
};

/// Gaussian kernel adjacency with zero diagonal; returns (A, sigma^2).
/// sigma^2 falls back to the mean squared distance when the variance
/// degenerates, and to 1 when everything is coincident.
std::pair<Matrix, double> build_adjacency(
    const Matrix& z, SigmaMode mode = SigmaMode::VarianceOfSquaredDistances);

/// D^{-1/2} A D^{-1/2}; isolated rows get a zero row/column.
Matrix build_laplacian(const Matrix& adjacency);

/// (I - alpha*L)^{-1} by dense column solves with partial pivoting. Throws
/// when the system is numerically singular instead of patching it.
Matrix build_propagator(const Matrix& laplacian, double alpha);

PropagationGraph build_source_graph(const Matrix& z_source, const GraphConfig& cfg);

/// Graph over minority-source rows stacked before target rows.
PropagationGraph build_cross_graph(const Matrix& z_minority, const Matrix& z_target,
                                   const GraphConfig& cfg);

/// One propagated embedding set (EP or KP), labels copied from seed rows.
struct PropagatedSet {
  Matrix embeddings;               // one row per seed
  std::vector<int> labels;
  std::vector<Index> seed_rows;    // row ids in the caller's source view
  bool degenerate_no_target = false;
};

/// Refine each minority row by propagator-weighted combination over the
/// whole source set (EP).
PropagatedSet propagate_within_source(const PropagationGraph& graph, const Matrix& z_source,
                                      const std::vector<int>& labels,
                                      const std::vector<Index>& minority_rows,
                                      const GraphConfig& cfg);

/// Refine each minority row over the minority+target union (KP). An empty
/// target degenerates to within-minority propagation and sets the flag.
PropagatedSet propagate_cross_domain(const PropagationGraph& graph, const Matrix& z_minority,
                                     const std::vector<int>& minority_labels,
                                     const Matrix& z_target, const GraphConfig& cfg);

}  // namespace fkt
