#pragma once

#include <vector>

#include "fkt/common.hpp"
#include "fkt/network.hpp"

namespace fkt {

/// Target-row class assignments taken from the prototype head's argmax.
struct PseudoLabels {
  std::vector<int> label;
  std::vector<double> confidence;  // max prototype probability
  std::vector<bool> accepted;      // false when below the confidence threshold
};

PseudoLabels pseudo_label(const PrototypeTable& prototypes, const Matrix& target_features,
                          double tau, double confidence_threshold = 0.0);

/// Per-class feature means; classes with no contributors stay undefined.
PrototypeTable class_means(const Matrix& features, const std::vector<int>& labels,
                           int class_count);

/// Class means over the augmented pool (real + EP + KP + MIX rows all count,
/// so minority prototypes are the amended ones).
PrototypeTable amended_prototypes(const Matrix& pool_features,
                                  const std::vector<int>& pool_labels, int class_count);

/// Means of target features grouped by accepted pseudo-label.
PrototypeTable target_prototypes(const Matrix& target_features, const PseudoLabels& pseudo,
                                 int class_count);

/// Mean squared distance between matched prototypes over the commonly
/// defined classes, with gradients at the prototype level.
struct ClassMmd {
  double value = 0.0;
  Matrix dmu_source;  // classes x feature
  Matrix dmu_target;
  std::vector<int> common_classes;
};
ClassMmd class_mmd(const PrototypeTable& source, const PrototypeTable& target);

/// Mean squared distance between mismatched prototype pairs (maximized).
/// Absent (present=false) when fewer than two classes are commonly defined.
struct InterclassDivergence {
  double value = 0.0;
  Matrix dmu_source;
  Matrix dmu_target;
  bool present = false;
};
InterclassDivergence interclass_divergence(const PrototypeTable& source,
                                           const PrototypeTable& target);

/// Both alignment terms plus the gradient of (M_c - M_d), restricted by the
/// term switches, pushed through the class means onto the contributing
/// features. Pseudo-label assignments are treated as constants.
struct AlignmentTerms {
  double m_c = 0.0;
  double m_d = 0.0;
  Matrix d_pool_features;    // gradient of (M_c - M_d) w.r.t. pool features
  Matrix d_target_features;
  int common_class_count = 0;
  bool mmd_present = false;        // some class defined on both sides
  bool divergence_present = false; // at least two such classes
};
AlignmentTerms alignment_terms(const Matrix& pool_features, const std::vector<int>& pool_labels,
                               const Matrix& target_features, const PseudoLabels& pseudo,
                               int class_count, bool use_intra, bool use_inter);

}  // namespace fkt
