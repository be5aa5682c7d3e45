#include "fkt/align.hpp"

namespace fkt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("align", msg); }

std::vector<int> commonly_defined(const PrototypeTable& a, const PrototypeTable& b) {
  std::vector<int> classes;
  const int C = std::min(a.classes(), b.classes());
  for (int c = 0; c < C; ++c)
    if (a.defined(c) && b.defined(c)) classes.push_back(c);
  return classes;
}

}  // namespace

PseudoLabels pseudo_label(const PrototypeTable& prototypes, const Matrix& target_features,
                          double tau, double confidence_threshold) {
  const Matrix probs = prototype_probabilities(prototypes, target_features, tau);
  PseudoLabels out;
  out.label.resize(static_cast<std::size_t>(probs.rows()));
  out.confidence.resize(static_cast<std::size_t>(probs.rows()));
  out.accepted.resize(static_cast<std::size_t>(probs.rows()));
  for (Index i = 0; i < probs.rows(); ++i) {
    Index best = 0;
    probs.row(i).maxCoeff(&best);
    out.label[static_cast<std::size_t>(i)] = static_cast<int>(best);
    out.confidence[static_cast<std::size_t>(i)] = probs(i, best);
    out.accepted[static_cast<std::size_t>(i)] = probs(i, best) >= confidence_threshold;
  }
  return out;
}

PrototypeTable class_means(const Matrix& features, const std::vector<int>& labels,
                           int class_count) {
  if (static_cast<Index>(labels.size()) != features.rows())
    fail("label count does not match feature rows");
  PrototypeTable table;
  table.mu = Matrix::Zero(class_count, features.cols());
  table.counts.assign(static_cast<std::size_t>(class_count), 0);
  for (Index i = 0; i < features.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= class_count) fail("label out of range in class_means");
    table.mu.row(c) += features.row(i);
    ++table.counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < class_count; ++c) {
    const long n = table.counts[static_cast<std::size_t>(c)];
    if (n > 0) table.mu.row(c) /= static_cast<double>(n);
  }
  return table;
}

PrototypeTable amended_prototypes(const Matrix& pool_features,
                                  const std::vector<int>& pool_labels, int class_count) {
  PrototypeTable table = class_means(pool_features, pool_labels, class_count);
  table.amended = true;
  return table;
}

PrototypeTable target_prototypes(const Matrix& target_features, const PseudoLabels& pseudo,
                                 int class_count) {
  if (static_cast<Index>(pseudo.label.size()) != target_features.rows())
    fail("pseudo-label count does not match target rows");
  PrototypeTable table;
  table.mu = Matrix::Zero(class_count, target_features.cols());
  table.counts.assign(static_cast<std::size_t>(class_count), 0);
  for (Index i = 0; i < target_features.rows(); ++i) {
    if (!pseudo.accepted[static_cast<std::size_t>(i)]) continue;
    const int c = pseudo.label[static_cast<std::size_t>(i)];
    table.mu.row(c) += target_features.row(i);
    ++table.counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < class_count; ++c) {
    const long n = table.counts[static_cast<std::size_t>(c)];
    if (n > 0) table.mu.row(c) /= static_cast<double>(n);
  }
  return table;
}

ClassMmd class_mmd(const PrototypeTable& source, const PrototypeTable& target) {
  ClassMmd out;
  out.common_classes = commonly_defined(source, target);
  if (out.common_classes.empty())
    fail("class MMD undefined: no class has both prototypes");
  out.dmu_source = Matrix::Zero(source.classes(), source.mu.cols());
  out.dmu_target = Matrix::Zero(target.classes(), target.mu.cols());
  const double scale = 1.0 / static_cast<double>(out.common_classes.size());
  for (int c : out.common_classes) {
    const Eigen::RowVectorXd delta = source.mu.row(c) - target.mu.row(c);
    out.value += scale * delta.squaredNorm();
    out.dmu_source.row(c) += 2.0 * scale * delta;
    out.dmu_target.row(c) -= 2.0 * scale * delta;
  }
  return out;
}

InterclassDivergence interclass_divergence(const PrototypeTable& source,
                                           const PrototypeTable& target) {
  InterclassDivergence out;
  const std::vector<int> classes = commonly_defined(source, target);
  out.dmu_source = Matrix::Zero(source.classes(), source.mu.cols());
  out.dmu_target = Matrix::Zero(target.classes(), target.mu.cols());
  if (classes.size() < 2) return out;  // reported absent, caller warns

  out.present = true;
  const double count = static_cast<double>(classes.size());
  const double scale = 1.0 / (count * (count - 1.0));
  for (int c : classes) {
    for (int other : classes) {
      if (other == c) continue;
      const Eigen::RowVectorXd delta = source.mu.row(c) - target.mu.row(other);
      out.value += scale * delta.squaredNorm();
      out.dmu_source.row(c) += 2.0 * scale * delta;
      out.dmu_target.row(other) -= 2.0 * scale * delta;
    }
  }
  return out;
}

AlignmentTerms alignment_terms(const Matrix& pool_features, const std::vector<int>& pool_labels,
                               const Matrix& target_features, const PseudoLabels& pseudo,
                               int class_count, bool use_intra, bool use_inter) {
  const PrototypeTable source = class_means(pool_features, pool_labels, class_count);
  const PrototypeTable target = target_prototypes(target_features, pseudo, class_count);

  AlignmentTerms out;
  out.d_pool_features = Matrix::Zero(pool_features.rows(), pool_features.cols());
  out.d_target_features = Matrix::Zero(target_features.rows(), target_features.cols());

  const std::vector<int> classes = commonly_defined(source, target);
  out.common_class_count = static_cast<int>(classes.size());
  out.mmd_present = !classes.empty();
  if (classes.empty()) return out;

  Matrix dmu_source = Matrix::Zero(class_count, pool_features.cols());
  Matrix dmu_target = Matrix::Zero(class_count, target_features.cols());

  const ClassMmd mmd = class_mmd(source, target);
  out.m_c = mmd.value;
  if (use_intra) {
    dmu_source += mmd.dmu_source;
    dmu_target += mmd.dmu_target;
  }

  const InterclassDivergence div = interclass_divergence(source, target);
  out.divergence_present = div.present;
  out.m_d = div.value;
  if (use_inter && div.present) {
    dmu_source -= div.dmu_source;
    dmu_target -= div.dmu_target;
  }

  // Push prototype-level gradients through the means onto every
  // contributing feature row.
  for (Index i = 0; i < pool_features.rows(); ++i) {
    const int c = pool_labels[static_cast<std::size_t>(i)];
    const long n = source.counts[static_cast<std::size_t>(c)];
    if (n > 0 && target.defined(c))
      out.d_pool_features.row(i) = dmu_source.row(c) / static_cast<double>(n);
  }
  for (Index i = 0; i < target_features.rows(); ++i) {
    if (!pseudo.accepted[static_cast<std::size_t>(i)]) continue;
    const int c = pseudo.label[static_cast<std::size_t>(i)];
    const long n = target.counts[static_cast<std::size_t>(c)];
    if (n > 0 && source.defined(c))
      out.d_target_features.row(i) = dmu_target.row(c) / static_cast<double>(n);
  }
  return out;
}

}  // namespace fkt
