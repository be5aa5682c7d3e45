#include "fkt/eval.hpp"

#include <sstream>

namespace fkt {

MetricsReport evaluate(const NetworkParams& params, const PrototypeTable& prototypes,
                       double tau, const EmbeddingDataset& target, const SplitSpec& split,
                       const EvalOptions& options) {
  if (!target.labeled())
    throw Error("eval", "evaluation requires a labeled target dataset");
  if (!prototypes.fully_defined())
    throw Error("eval", "evaluation requires a prototype for every class");
  if (target.class_count != prototypes.classes())
    throw Error("eval", "class count mismatch between target and prototypes");

  const Matrix features = forward_generator_batch(params, target.embeddings).features;
  const Matrix probs_neural = neural_probabilities(params, features);
  const Matrix probs_proto = prototype_probabilities(prototypes, features, tau);

  const int C = target.class_count;
  MetricsReport report;
  report.present = true;
  report.per_class_correct.assign(static_cast<std::size_t>(C), 0);
  report.per_class_total.assign(static_cast<std::size_t>(C), 0);

  for (Index i = 0; i < target.rows(); ++i) {
    const int truth = target.labels[static_cast<std::size_t>(i)];
    const bool minority = split.is_minority(truth);

    Index predicted = 0;
    if (options.deploy_mode || minority)
      probs_proto.row(i).maxCoeff(&predicted);
    else
      probs_neural.row(i).maxCoeff(&predicted);

    const bool correct = static_cast<int>(predicted) == truth;
    ++report.per_class_total[static_cast<std::size_t>(truth)];
    if (correct) ++report.per_class_correct[static_cast<std::size_t>(truth)];
    if (minority) {
      ++report.n_f;
      if (correct) ++report.correct_f;
    } else {
      ++report.n_m;
      if (correct) ++report.correct_m;
    }
  }

  report.has_minority = report.n_f > 0;
  report.has_majority = report.n_m > 0;
  if (report.has_minority)
    report.a_f = 100.0 * static_cast<double>(report.correct_f) / static_cast<double>(report.n_f);
  if (report.has_majority)
    report.a_m = 100.0 * static_cast<double>(report.correct_m) / static_cast<double>(report.n_m);

  if (options.classwise_overall) {
    double sum = 0.0;
    int classes_seen = 0;
    for (int c = 0; c < C; ++c) {
      const long total = report.per_class_total[static_cast<std::size_t>(c)];
      if (total == 0) continue;
      sum += static_cast<double>(report.per_class_correct[static_cast<std::size_t>(c)]) /
             static_cast<double>(total);
      ++classes_seen;
    }
    report.a_o = classes_seen > 0 ? 100.0 * sum / classes_seen : 0.0;
  } else {
    report.a_o = 100.0 * static_cast<double>(report.correct_total()) /
                 static_cast<double>(report.n_total());
  }
  return report;
}

std::string metrics_tsv(const std::string& task, std::uint64_t seed, long epoch,
                        const MetricsReport& report) {
  std::ostringstream out;
  out << "task\tseed\tepoch\ta_f\ta_m\ta_o";
  for (std::size_t c = 0; c < report.per_class_total.size(); ++c) out << "\tclass_" << c;
  out << '\n';

  out << task << '\t' << seed << '\t' << epoch << '\t';
  out << (report.has_minority ? format_double(report.a_f) : "-") << '\t';
  out << (report.has_majority ? format_double(report.a_m) : "-") << '\t';
  out << format_double(report.a_o);
  for (std::size_t c = 0; c < report.per_class_total.size(); ++c) {
    out << '\t';
    const long total = report.per_class_total[c];
    if (total == 0)
      out << '-';
    else
      out << format_double(100.0 * static_cast<double>(report.per_class_correct[c]) /
                           static_cast<double>(total));
  }
  out << '\n';
  return out.str();
}

}  // namespace fkt
