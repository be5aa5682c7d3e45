#include <doctest.h>

#include <cmath>

#include "fkt/align.hpp"
#include "fkt/rng.hpp"
#include "test_util.hpp"

using namespace fkt;
using fkt_test::rel_err;

namespace {

PrototypeTable table_from(std::initializer_list<std::initializer_list<double>> rows,
                          std::vector<long> counts) {
  PrototypeTable t;
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.begin()->size());
  t.mu.resize(n, d);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) t.mu(i, j++) = v;
    ++i;
  }
  t.counts = std::move(counts);
  return t;
}

PseudoLabels all_accepted(std::vector<int> labels) {
  PseudoLabels p;
  p.label = std::move(labels);
  p.confidence.assign(p.label.size(), 1.0);
  p.accepted.assign(p.label.size(), true);
  return p;
}

}  // namespace

TEST_CASE("class means degenerate to the plain mean without synthetic rows") {
  Matrix f(4, 2);
  f << 1, 0, 3, 2, 0, 1, 2, 3;
  const PrototypeTable t = class_means(f, {0, 0, 1, 1}, 2);
  CHECK(t.mu(0, 0) == 2.0);
  CHECK(t.mu(0, 1) == 1.0);
  CHECK(t.mu(1, 0) == 1.0);
  CHECK(t.mu(1, 1) == 2.0);
  CHECK(t.counts == std::vector<long>{2, 2});
  CHECK_FALSE(t.amended);
}

TEST_CASE("a real plus a mixup feature average to their midpoint") {
  Matrix f(2, 2);
  f << 1, 0, 0, 1;
  const PrototypeTable t = amended_prototypes(f, {0, 0}, 1);
  CHECK(t.mu(0, 0) == 0.5);
  CHECK(t.mu(0, 1) == 0.5);
  CHECK(t.amended);
}

TEST_CASE("the amended denominator counts real + EP + KP + k mixups") {
  // 1 real + 1 EP + 1 KP + 5 MIX rows of one class: denominator 8.
  Matrix f = Matrix::Ones(8, 3);
  const PrototypeTable t = amended_prototypes(f, std::vector<int>(8, 0), 2);
  CHECK(t.counts[0] == 8);
  CHECK(t.counts[1] == 0);
  CHECK(t.defined(0));
  CHECK_FALSE(t.defined(1));
}

TEST_CASE("target prototypes follow the pseudo-label assignment") {
  Matrix f(2, 2);
  f << 0, 2, 2, 0;
  const PrototypeTable t = target_prototypes(f, all_accepted({1, 1}), 3);
  CHECK(t.mu(1, 0) == 1.0);
  CHECK(t.mu(1, 1) == 1.0);
  CHECK(t.counts == std::vector<long>{0, 2, 0});
}

TEST_CASE("one swallowed class leaves the others undefined") {
  Matrix f(3, 2);
  f << 1, 1, 3, 3, 5, 5;
  const PrototypeTable t = target_prototypes(f, all_accepted({2, 2, 2}), 4);
  CHECK(t.defined(2));
  CHECK(t.mu(2, 0) == 3.0);
  for (int c : {0, 1, 3}) CHECK_FALSE(t.defined(c));
}

TEST_CASE("class MMD vanishes exactly on identical tables") {
  const PrototypeTable s = table_from({{1.0, 2.0}, {3.0, -1.0}}, {2, 2});
  const ClassMmd m = class_mmd(s, s);
  CHECK(m.value == 0.0);
  CHECK(m.common_classes == std::vector<int>{0, 1});
}

TEST_CASE("single-class MMD is the squared distance: ||(3,4)||^2 = 25") {
  const PrototypeTable s = table_from({{0.0, 0.0}}, {1});
  const PrototypeTable t = table_from({{3.0, 4.0}}, {1});
  const ClassMmd m = class_mmd(s, t);
  CHECK(m.value == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("class MMD is symmetric under swapping the tables") {
  Rng rng(64);
  PrototypeTable s, t;
  s.mu.resize(3, 4);
  t.mu.resize(3, 4);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) {
      s.mu(i, j) = rng.normal();
      t.mu(i, j) = rng.normal();
    }
  s.counts = {1, 1, 1};
  t.counts = {1, 1, 1};
  CHECK(class_mmd(s, t).value == doctest::Approx(class_mmd(t, s).value).epsilon(1e-12));
}

TEST_CASE("class MMD skips undefined classes and errors with none in common") {
  const PrototypeTable s = table_from({{1.0, 0.0}, {5.0, 5.0}}, {1, 0});
  const PrototypeTable t = table_from({{2.0, 0.0}, {9.0, 9.0}}, {1, 1});
  const ClassMmd m = class_mmd(s, t);
  CHECK(m.common_classes == std::vector<int>{0});
  CHECK(m.value == doctest::Approx(1.0));

  const PrototypeTable none = table_from({{0.0, 0.0}, {0.0, 0.0}}, {0, 1});
  const PrototypeTable other = table_from({{0.0, 0.0}, {0.0, 0.0}}, {1, 0});
  CHECK_THROWS_AS(class_mmd(none, other), Error);
}

TEST_CASE("two-class inter-class divergence matches the hand evaluation") {
  const PrototypeTable s = table_from({{0.0, 0.0}, {1.0, 0.0}}, {1, 1});
  const PrototypeTable t = table_from({{0.0, 0.0}, {1.0, 0.0}}, {1, 1});
  const InterclassDivergence d = interclass_divergence(s, t);
  CHECK(d.present);
  // (1/2)(1/1) * (||mu_s^0 - mu_t^1||^2 + ||mu_s^1 - mu_t^0||^2) = 1
  CHECK(d.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coincident prototypes have zero divergence") {
  const PrototypeTable s = table_from({{2.0, 2.0}, {2.0, 2.0}}, {1, 1});
  const InterclassDivergence d = interclass_divergence(s, s);
  CHECK(d.present);
  CHECK(d.value == 0.0);
}

TEST_CASE("divergence is reported absent below two common classes") {
  const PrototypeTable s = table_from({{1.0, 0.0}, {0.0, 0.0}}, {1, 0});
  const PrototypeTable t = table_from({{2.0, 0.0}, {3.0, 0.0}}, {1, 1});
  const InterclassDivergence d = interclass_divergence(s, t);
  CHECK_FALSE(d.present);
  CHECK(d.value == 0.0);
}

TEST_CASE("both terms are invariant under a simultaneous class permutation") {
  Rng rng(600);
  PrototypeTable s, t;
  s.mu.resize(4, 3);
  t.mu.resize(4, 3);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) {
      s.mu(i, j) = rng.normal();
      t.mu(i, j) = rng.normal();
    }
  s.counts = {1, 1, 1, 1};
  t.counts = {1, 1, 1, 1};

  const std::vector<int> perm{2, 0, 3, 1};
  PrototypeTable sp = s, tp = t;
  for (int c = 0; c < 4; ++c) {
    sp.mu.row(perm[static_cast<std::size_t>(c)]) = s.mu.row(c);
    tp.mu.row(perm[static_cast<std::size_t>(c)]) = t.mu.row(c);
  }
  CHECK(class_mmd(sp, tp).value == doctest::Approx(class_mmd(s, t).value).epsilon(1e-12));
  CHECK(interclass_divergence(sp, tp).value ==
        doctest::Approx(interclass_divergence(s, t).value).epsilon(1e-12));
}

TEST_CASE("pseudo-label argmax ignores positive feature scaling") {
  PrototypeTable table;
  Rng rng(71);
  table.mu.resize(3, 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 5; ++j) table.mu(i, j) = rng.normal();
  table.counts = {1, 1, 1};
  Matrix f(6, 5);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 5; ++j) f(i, j) = rng.normal();

  const PseudoLabels a = pseudo_label(table, f, 10.0);
  const PseudoLabels b = pseudo_label(table, Matrix(3.0 * f), 10.0);
  CHECK(a.label == b.label);
}

TEST_CASE("confidence thresholding drops low-confidence rows from prototypes") {
  PrototypeTable table;
  table.mu.resize(2, 2);
  table.mu << 1.0, 0.0, 0.0, 1.0;
  table.counts = {1, 1};
  Matrix f(2, 2);
  f << 5.0, 0.0,   // confidently class 0
      1.0, 0.99;   // nearly diagonal: low confidence
  const PseudoLabels p = pseudo_label(table, f, 1.0, 0.6);
  CHECK(p.accepted[0]);
  CHECK_FALSE(p.accepted[1]);
  const PrototypeTable t = target_prototypes(f, p, 2);
  CHECK(t.counts[0] == 1);
  CHECK(t.counts[1] == 0);
}

TEST_CASE("alignment gradients through the feature means match finite differences") {
  // 3 classes, 12 pool samples, 9 target rows, through a small generator.
  const int C = 3;
  NetworkDims dims;
  dims.input = 4;
  dims.hidden = 6;
  dims.feature = 5;
  dims.cls_hidden = 4;
  dims.classes = C;
  NetworkParams params = init_params(dims, 99);

  Rng rng(100);
  Matrix z_pool(12, dims.input), z_target(9, dims.input);
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < dims.input; ++j) z_pool(i, j) = rng.normal();
  for (Index i = 0; i < 9; ++i)
    for (Index j = 0; j < dims.input; ++j) z_target(i, j) = rng.normal();
  std::vector<int> pool_labels;
  for (int i = 0; i < 12; ++i) pool_labels.push_back(i % C);
  const PseudoLabels pseudo = all_accepted({0, 1, 2, 0, 1, 2, 0, 1, 2});

  const double lambda = 0.35;
  auto objective = [&](const NetworkParams& p) {
    const Matrix f_pool = forward_generator_batch(p, z_pool).features;
    const Matrix f_tgt = forward_generator_batch(p, z_target).features;
    const PrototypeTable s = class_means(f_pool, pool_labels, C);
    const PrototypeTable t = target_prototypes(f_tgt, pseudo, C);
    return lambda * (class_mmd(s, t).value - interclass_divergence(s, t).value);
  };

  // Analytic gradient: alignment terms pushed through the generator.
  const GenCache pool_cache = forward_generator_batch(params, z_pool);
  const GenCache tgt_cache = forward_generator_batch(params, z_target);
  const AlignmentTerms at = alignment_terms(pool_cache.features, pool_labels,
                                            tgt_cache.features, pseudo, C, true, true);
  REQUIRE(at.mmd_present);
  REQUIRE(at.divergence_present);
  GeneratorParams g_pool = backward_generator(params, pool_cache, z_pool,
                                              Matrix(lambda * at.d_pool_features));
  const GeneratorParams g_tgt = backward_generator(params, tgt_cache, z_target,
                                                   Matrix(lambda * at.d_target_features));
  g_pool.w1 += g_tgt.w1;
  g_pool.b1 += g_tgt.b1;
  g_pool.w2 += g_tgt.w2;
  g_pool.b2 += g_tgt.b2;

  const double h = 1e-5;
  double worst = 0.0;
  auto sweep = [&](double* data, const double* analytic, Index n) {
    for (Index i = 0; i < n; ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = objective(params);
      data[i] = saved - h;
      const double down = objective(params);
      data[i] = saved;
      worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
  };
  sweep(params.gen.w1.data(), g_pool.w1.data(), params.gen.w1.size());
  sweep(params.gen.b1.data(), g_pool.b1.data(), params.gen.b1.size());
  sweep(params.gen.w2.data(), g_pool.w2.data(), params.gen.w2.size());
  sweep(params.gen.b2.data(), g_pool.b2.data(), params.gen.b2.size());

  CHECK(worst < 1e-4);
}
