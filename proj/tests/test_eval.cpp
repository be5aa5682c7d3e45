#include <doctest.h>

#include "fkt/eval.hpp"
#include "test_util.hpp"

using namespace fkt;

namespace {

// Identity-ish model: for positive inputs, features = z and logits = z, so
// the neural head predicts the larger coordinate. Prototypes are set on the
// axes, so for positive rows the prototype head agrees unless told otherwise.
struct Fixture {
  NetworkParams params;
  PrototypeTable prototypes;
  EmbeddingDataset target;
  SplitSpec split{{0}, 1};

  Fixture() {
    NetworkDims dims;
    dims.input = 2;
    dims.hidden = 2;
    dims.feature = 2;
    dims.cls_hidden = 2;
    dims.classes = 2;
    params = init_params(dims, 0);
    params.gen.w1 = Matrix::Identity(2, 2);
    params.gen.b1.setZero();
    params.gen.w2 = Matrix::Identity(2, 2);
    params.gen.b2.setZero();
    params.cls.w1 = Matrix::Identity(2, 2);
    params.cls.b1.setZero();
    params.cls.w2 = Matrix::Identity(2, 2);
    params.cls.c2.setZero();

    prototypes.mu.resize(2, 2);
    prototypes.mu << 1.0, 0.0, 0.0, 1.0;
    prototypes.counts = {1, 1};

    target.domain = Domain::Target;
    target.class_count = 2;
    target.embeddings.resize(10, 2);
    // 4 minority rows (true class 0): 3 scored correctly by the prototype head
    target.embeddings.row(0) << 2.0, 1.0;
    target.embeddings.row(1) << 3.0, 1.0;
    target.embeddings.row(2) << 5.0, 2.0;
    target.embeddings.row(3) << 1.0, 2.0;  // wrong
    // 6 majority rows (true class 1): 5 scored correctly by the neural head
    target.embeddings.row(4) << 1.0, 2.0;
    target.embeddings.row(5) << 1.0, 3.0;
    target.embeddings.row(6) << 2.0, 5.0;
    target.embeddings.row(7) << 1.0, 4.0;
    target.embeddings.row(8) << 2.0, 3.0;
    target.embeddings.row(9) << 4.0, 1.0;  // wrong
    target.labels = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  }
};

}  // namespace

TEST_CASE("manual count oracle: 3/4 minority and 5/6 majority") {
  Fixture fx;
  const MetricsReport r = evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split);
  CHECK(r.present);
  CHECK(r.n_f == 4);
  CHECK(r.n_m == 6);
  CHECK(r.correct_f == 3);
  CHECK(r.correct_m == 5);
  CHECK(r.a_f == 75.0);
  CHECK(r.a_m == doctest::Approx(100.0 * 5.0 / 6.0).epsilon(1e-12));
  CHECK(r.a_o == 80.0);
  // count-consistency identity, exactly
  CHECK(r.correct_f + r.correct_m == r.correct_total());
  CHECK(r.n_f + r.n_m == 10);
  CHECK(r.per_class_total == std::vector<long>{4, 6});
  CHECK(r.per_class_correct == std::vector<long>{3, 5});
  CHECK(r.a_f >= 0.0);
  CHECK(r.a_f <= 100.0);
  CHECK(r.a_o >= 0.0);
  CHECK(r.a_o <= 100.0);
}

TEST_CASE("perfect predictions give 100 everywhere") {
  Fixture fx;
  EmbeddingDataset easy = fx.target;
  easy.embeddings.resize(4, 2);
  easy.embeddings.row(0) << 5.0, 1.0;
  easy.embeddings.row(1) << 4.0, 1.0;
  easy.embeddings.row(2) << 1.0, 5.0;
  easy.embeddings.row(3) << 1.0, 4.0;
  easy.labels = {0, 0, 1, 1};
  const MetricsReport r = evaluate(fx.params, fx.prototypes, 10.0, easy, fx.split);
  CHECK(r.a_f == 100.0);
  CHECK(r.a_m == 100.0);
  CHECK(r.a_o == 100.0);
}

TEST_CASE("an empty minority set leaves a_f undefined and a_o = a_m") {
  Fixture fx;
  const SplitSpec no_minority{{}, 1};
  const MetricsReport r = evaluate(fx.params, fx.prototypes, 10.0, fx.target, no_minority);
  CHECK_FALSE(r.has_minority);
  CHECK(r.n_f == 0);
  CHECK(r.a_o == doctest::Approx(r.a_m).epsilon(1e-12));
}

TEST_CASE("deploy mode scores every row with the prototype head") {
  Fixture fx;
  // Swap the prototypes: the prototype head now prefers the smaller
  // coordinate, so majority rows flip while the neural route would not.
  fx.prototypes.mu << 0.0, 1.0, 1.0, 0.0;
  EvalOptions opt;
  opt.deploy_mode = true;
  const MetricsReport deploy = evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split, opt);
  const MetricsReport routed = evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split);
  // Routed: majority still scored by the neural head (5/6 correct).
  CHECK(routed.correct_m == 5);
  // Deploy: the swapped prototype head inverts the majority outcomes.
  CHECK(deploy.correct_m == 1);
}

TEST_CASE("class-wise overall averages per-class accuracies") {
  Fixture fx;
  EvalOptions opt;
  opt.classwise_overall = true;
  const MetricsReport r = evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split, opt);
  CHECK(r.a_o == doctest::Approx(100.0 * (0.75 + 5.0 / 6.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("evaluation is read-only on the model") {
  Fixture fx;
  const NetworkParams params_before = fx.params;
  const PrototypeTable proto_before = fx.prototypes;
  (void)evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split);
  CHECK(fkt_test::bitwise_equal(params_before.gen.w1, fx.params.gen.w1));
  CHECK(fkt_test::bitwise_equal(params_before.cls.w2, fx.params.cls.w2));
  CHECK(fkt_test::bitwise_equal(proto_before.mu, fx.prototypes.mu));
}

TEST_CASE("evaluation rejects unlabeled targets and undefined prototypes") {
  Fixture fx;
  EmbeddingDataset unlabeled = fx.target;
  unlabeled.labels.clear();
  CHECK_THROWS_WITH_AS(evaluate(fx.params, fx.prototypes, 10.0, unlabeled, fx.split),
                       doctest::Contains("labeled"), Error);

  fx.prototypes.counts = {1, 0};
  CHECK_THROWS_WITH_AS(evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split),
                       doctest::Contains("prototype"), Error);
}

TEST_CASE("metrics TSV carries the documented columns") {
  Fixture fx;
  const MetricsReport r = evaluate(fx.params, fx.prototypes, 10.0, fx.target, fx.split);
  const std::string tsv = metrics_tsv("toy", 7, 30, r);
  CHECK(tsv.find("task\tseed\tepoch\ta_f\ta_m\ta_o\tclass_0\tclass_1\n") == 0);
  CHECK(tsv.find("toy\t7\t30\t75\t") != std::string::npos);
}
