#include <doctest.h>

#include "fkt/augment.hpp"
#include "test_util.hpp"

using namespace fkt;

namespace {

PropagatedSet make_set(std::initializer_list<std::initializer_list<double>> rows,
                       std::vector<int> labels, std::vector<Index> seeds) {
  PropagatedSet s;
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.begin()->size());
  s.embeddings.resize(n, d);
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) s.embeddings(i, j++) = v;
    ++i;
  }
  s.labels = std::move(labels);
  s.seed_rows = std::move(seeds);
  return s;
}

}  // namespace

TEST_CASE("beta draws stay in [0,1], average a/(a+b), and replay per seed") {
  Rng rng(100);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double g = sample_beta(2.0, 2.0, rng);
    REQUIRE(g >= 0.0);
    REQUIRE(g <= 1.0);
    sum += g;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);

  Rng a(17), b(17);
  for (int i = 0; i < 100; ++i) CHECK(sample_beta(1.5, 3.0, a) == sample_beta(1.5, 3.0, b));
}

TEST_CASE("asymmetric beta mean tracks a/(a+b)") {
  Rng rng(300);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_beta(2.0, 6.0, rng);
  CHECK(std::abs(sum / n - 0.25) < 0.01);
}

TEST_CASE("mix hits its endpoints and interpolates exactly") {
  Vector zs(2), zo(2);
  zs << 1.0, 0.0;
  zo << 0.0, 1.0;
  CHECK(fkt_test::bitwise_equal(mix(zs, zo, 0.0), zs));
  CHECK(fkt_test::bitwise_equal(mix(zs, zo, 1.0), zo));
  const Vector m = mix(zs, zo, 0.25);
  CHECK(m[0] == 0.75);
  CHECK(m[1] == 0.25);

  Vector bad(3);
  CHECK_THROWS_AS(mix(zs, bad, 0.5), Error);
}

namespace {

struct PoolFixture {
  Matrix z_real;
  std::vector<int> labels;
  PropagatedSet ep, kp;

  PoolFixture() {
    z_real.resize(5, 2);
    z_real << 0, 0, 1, 0, 2, 0, 3, 3, 4, 4;
    labels = {0, 0, 0, 1, 1};
    // three minority seeds (class-1 rows 3, 4 plus an extra synthetic seed)
    ep = make_set({{3.1, 3.0}, {4.1, 4.0}, {3.5, 3.5}}, {1, 1, 1}, {3, 4, 3});
    kp = make_set({{2.9, 3.2}, {3.9, 4.2}, {3.4, 3.6}}, {1, 1, 1}, {3, 4, 3});
  }
};

}  // namespace

TEST_CASE("k = 0 yields no mixup rows") {
  PoolFixture f;
  Rng rng(1);
  const AugmentedPool pool =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 0}, rng, {});
  CHECK(pool.n_mix == 0);
  CHECK(pool.rows() == 5 + 3 + 3);
}

TEST_CASE("three seeds at k = 5 emit fifteen mixup rows and the size identity") {
  PoolFixture f;
  Rng rng(2);
  const AugmentedPool pool =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 5}, rng, {});
  CHECK(pool.n_mix == 15);
  // n_s + n_f + n_f + k*n_f with n_s = 5, n_f = 3, k = 5
  CHECK(pool.rows() == 5 + 3 + 3 + 15);
  CHECK(pool.rows() == pool.n_real + pool.n_ep + pool.n_kp + pool.n_mix);
}

TEST_CASE("disabling every synthetic set leaves only the real rows") {
  PoolFixture f;
  Rng rng(3);
  const AugmentSelection none{false, false, false};
  const AugmentedPool pool =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 5}, rng, none);
  CHECK(pool.rows() == 5);
  CHECK(pool.n_ep == 0);
  CHECK(pool.n_kp == 0);
  CHECK(pool.n_mix == 0);
  CHECK(fkt_test::bitwise_equal(pool.embeddings, f.z_real));
}

TEST_CASE("single-set ablations drop exactly their set") {
  PoolFixture f;
  Rng rng(4);
  const AugmentedPool no_ep =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 2}, rng,
                           {false, true, true});
  CHECK(no_ep.n_ep == 0);
  CHECK(no_ep.n_kp == 3);
  CHECK(no_ep.n_mix == 6);  // mixup still uses both parents
}

TEST_CASE("every synthetic row carries its seed row's label") {
  PoolFixture f;
  Rng rng(5);
  const AugmentedPool pool =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 5}, rng, {});
  for (Index i = 0; i < pool.rows(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (pool.provenance[s] == Provenance::Real) continue;
    const Index seed = pool.seed_row[s];
    CHECK(pool.labels[s] == f.labels[static_cast<std::size_t>(seed)]);
  }
}

TEST_CASE("every mixup row sits exactly on its parents' segment") {
  PoolFixture f;
  Rng rng(6);
  const AugmentedPool pool =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 4}, rng, {});
  Index mix_index = 0;
  for (Index i = 0; i < pool.rows(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (pool.provenance[s] != Provenance::Mix) continue;
    const Index seed_pos = mix_index / 4;  // parents are paired by position
    const double g = pool.gamma[s];
    const Vector expected = mix(f.ep.embeddings.row(seed_pos).transpose(),
                                f.kp.embeddings.row(seed_pos).transpose(), g);
    CHECK((pool.embeddings.row(i).transpose() - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
    ++mix_index;
  }
  CHECK(mix_index == 12);
}

TEST_CASE("pool construction replays bit-for-bit under a fixed seed") {
  PoolFixture f;
  Rng r1(42), r2(42);
  const AugmentedPool a =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 5}, r1, {});
  const AugmentedPool b =
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, 5}, r2, {});
  CHECK(fkt_test::bitwise_equal(a.embeddings, b.embeddings));
  CHECK(a.gamma == b.gamma);
  CHECK(a.labels == b.labels);
}

TEST_CASE("invalid augmentation configs are rejected") {
  PoolFixture f;
  Rng rng(9);
  CHECK_THROWS_AS(
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {0.0, 2.0, 5}, rng, {}), Error);
  CHECK_THROWS_AS(
      build_augmented_pool(f.z_real, f.labels, 2, f.ep, f.kp, {2.0, 2.0, -1}, rng, {}), Error);
}
