#include "fkt/trainer.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>

#include "fkt/rng.hpp"

namespace fkt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("trainer", msg); }

Matrix gather_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<Index>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
  return out;
}

PropagatedSet empty_set(Index dim) {
  PropagatedSet s;
  s.embeddings.resize(0, dim);
  return s;
}

long elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

#ifndef NDEBUG
bool bitwise_equal(const ClassifierParams& a, const ClassifierParams& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.size() == y.size() &&
           std::equal(x.data(), x.data() + x.size(), y.data());
  };
  return same(a.w1, b.w1) && same(a.b1, b.b1) && same(a.w2, b.w2) && same(a.c2, b.c2);
}
#endif

}  // namespace

void Hyperparams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0,1)");
  if (lambda < 0.0) fail("lambda must be nonnegative");
  if (!(lr > 0.0) || !(pretrain_lr > 0.0)) fail("learning rates must be positive");
  if (pretrain_epochs < 0 || train_epochs < 0) fail("epoch counts must be nonnegative");
  if (mix_count < 0) fail("mix count must be nonnegative");
  if (!(beta_a > 0.0) || !(beta_b > 0.0)) fail("beta parameters must be positive");
  if (!(tau > 0.0)) fail("tau must be positive");
  if (pseudo_confidence < 0.0 || pseudo_confidence > 1.0)
    fail("pseudo-label confidence threshold must lie in [0,1]");
  if (hidden < 1 || feature < 1 || cls_hidden < 1) fail("layer widths must be positive");
  if (mode == TrainMode::Episodic) {
    if (episode_p < 1 || episode_q < 1) fail("episode p and q must be at least 1");
    if (episode_targets < 1) fail("episode target count must be at least 1");
  }
}

void AblationFlags::normalize() {
  if (!use_cpa) {
    use_cpa_intra = false;
    use_cpa_inter = false;
  }
  if (!use_cda) {
    use_cda_s = false;
    use_cda_t = false;
    use_cda_mix = false;
  }
}

AugmentSelection AblationFlags::selection() const {
  return {use_cda && use_cda_s, use_cda && use_cda_t, use_cda && use_cda_mix};
}

void pretrain(const Matrix& z, const std::vector<int>& labels, NetworkParams& params,
              OptimizerState& opt, int epochs) {
  for (int e = 0; e < epochs; ++e) {
    const SupervisedLoss sl = supervised_loss(z, labels, params);
    if (!std::isfinite(sl.value)) fail("non-finite loss during pretraining");
    adam_step(params, sl.grads, opt, UpdateScope::All);
  }
}

double step_a(const AugmentedPool& pool, NetworkParams& params, OptimizerState& opt,
              long* clamp_count) {
  const SupervisedLoss sl = supervised_loss(pool.embeddings, pool.labels, params);
  if (!std::isfinite(sl.value)) fail("non-finite loss in step A");
  if (clamp_count) *clamp_count += sl.clamped;
  adam_step(params, sl.grads, opt, UpdateScope::All);
  return sl.value;
}

StepBResult step_b(const AugmentedPool& pool, const Matrix& z_target,
                   const PseudoLabels& pseudo, NetworkParams& params, OptimizerState& opt,
                   const Hyperparams& hp, const AblationFlags& flags, long* clamp_count) {
  const GenCache gen_pool = forward_generator_batch(params, pool.embeddings);
  const ClsCache cls_pool = forward_classifier_batch(params, gen_pool.features);
  const CrossEntropy ce = cross_entropy(cls_pool.probs, pool.labels);
  if (clamp_count) *clamp_count += ce.clamped;

  StepBResult out;
  out.m_s = ce.value;

  // The classifier is frozen here: its transposes route the supervised
  // gradient back to the features, but its own gradients are discarded.
  const ClassifierBackward cb =
      backward_classifier(params, cls_pool, gen_pool.features, ce.dlogits);
  Matrix dfeat_pool = cb.dfeatures;

  NetworkGrads grads = zero_grads(params.dims);
  bool have_target_grad = false;
  GenCache gen_tgt;

  if (flags.alignment_enabled() && hp.lambda > 0.0) {
    gen_tgt = forward_generator_batch(params, z_target);
    const AlignmentTerms at =
        alignment_terms(gen_pool.features, pool.labels, gen_tgt.features, pseudo,
                        pool.class_count, flags.use_cpa_intra, flags.use_cpa_inter);
    if (!at.mmd_present) {
      out.alignment_dropped = true;
    } else {
      out.m_c = flags.use_cpa_intra ? at.m_c : 0.0;
      out.m_d = (flags.use_cpa_inter && at.divergence_present) ? at.m_d : 0.0;
      dfeat_pool += hp.lambda * at.d_pool_features;
      if (z_target.rows() > 0) {
        grads.gen = backward_generator(params, gen_tgt, z_target,
                                       Matrix(hp.lambda * at.d_target_features));
        have_target_grad = true;
      }
    }
  }

  const GeneratorParams pool_grads =
      backward_generator(params, gen_pool, pool.embeddings, dfeat_pool);
  if (have_target_grad) {
    grads.gen.w1 += pool_grads.w1;
    grads.gen.b1 += pool_grads.b1;
    grads.gen.w2 += pool_grads.w2;
    grads.gen.b2 += pool_grads.b2;
  } else {
    grads.gen = pool_grads;
  }

#ifndef NDEBUG
  const ClassifierParams frozen = params.cls;
#endif
  adam_step(params, grads, opt, UpdateScope::GeneratorOnly);
#ifndef NDEBUG
  assert(bitwise_equal(frozen, params.cls) && "step B must not touch the classifier");
#endif
  return out;
}

namespace {

struct PreparedAugmentation {
  PropagatedSet ep;
  PropagatedSet kp;
  bool kp_degenerate = false;
};

// EP/KP are deterministic functions of the fixed embeddings, built from the
// graphs; MIX alone is redrawn per epoch.
PreparedAugmentation prepare_augmentation(const Matrix& z_source,
                                          const std::vector<int>& labels,
                                          const std::vector<Index>& minority_rows,
                                          const Matrix& z_target, const GraphConfig& gcfg,
                                          const AugmentSelection& select, TrainStats& stats) {
  PreparedAugmentation prep;
  prep.ep = empty_set(z_source.cols());
  prep.kp = empty_set(z_source.cols());
  if (minority_rows.empty()) return prep;

  const bool need_ep = select.include_ep || select.include_mix;
  const bool need_kp = select.include_kp || select.include_mix;

  if (need_ep) {
    const PropagationGraph gs = build_source_graph(z_source, gcfg);
    ++stats.source_graph_builds;
    prep.ep = propagate_within_source(gs, z_source, labels, minority_rows, gcfg);
  }
  if (need_kp) {
    const Matrix z_min = gather_rows(z_source, minority_rows);
    const std::vector<int> y_min = gather_labels(labels, minority_rows);
    const PropagationGraph go = build_cross_graph(z_min, z_target, gcfg);
    ++stats.cross_graph_builds;
    prep.kp = propagate_cross_domain(go, z_min, y_min, z_target, gcfg);
    prep.kp.seed_rows = minority_rows;  // remap into the caller's row frame
    prep.kp_degenerate = prep.kp.degenerate_no_target;
  }
  return prep;
}

}  // namespace

TrainResult train(const EmbeddingDataset& source, const EmbeddingDataset& target,
                  const SplitSpec& split, const Hyperparams& hp, AblationFlags flags) {
  hp.validate();
  flags.normalize();
  source.validate();
  target.validate();
  if (source.domain != Domain::Source) fail("first dataset must be the source domain");
  if (target.domain != Domain::Target) fail("second dataset must be the target domain");
  if (source.dim() != target.dim()) fail("source and target dimensions differ");
  if (source.class_count != target.class_count)
    fail("source and target class counts differ");

  const int C = source.class_count;
  const Index d = source.dim();

  const SplitResult split_result = apply_split(source, split, Rng::derive(hp.seed, "split"));
  const std::vector<Index> kept = split_result.kept_rows();
  const Matrix z_s = gather_rows(source.embeddings, kept);
  const std::vector<int> y_s = gather_labels(source.labels, kept);

  std::vector<Index> minority_rows;
  for (std::size_t i = 0; i < y_s.size(); ++i)
    if (split.is_minority(y_s[i])) minority_rows.push_back(static_cast<Index>(i));

  const GraphConfig gcfg{hp.alpha, hp.row_normalize, hp.sigma_mode,
                         hp.ep_restrict_to_minority};
  const AugmentationConfig acfg{hp.beta_a, hp.beta_b, hp.mix_count};
  const AugmentSelection select = flags.selection();

  TrainResult result;
  TrainStats& stats = result.stats;

  NetworkDims dims;
  dims.input = static_cast<int>(d);
  dims.hidden = hp.hidden;
  dims.feature = hp.feature;
  dims.cls_hidden = hp.cls_hidden;
  dims.classes = C;

  NetworkParams params = init_params(dims, Rng::derive(hp.seed, "init"));
  OptimizerState opt = OptimizerState::create(params);
  opt.lr = hp.pretrain_lr;
  pretrain(z_s, y_s, params, opt, hp.pretrain_epochs);
  opt.lr = hp.lr;

  Rng mix_rng(Rng::derive(hp.seed, "mix"));
  Rng episode_rng(Rng::derive(hp.seed, "episode"));

  ModelState& model = result.model;
  model.seed = hp.seed;
  model.tau = hp.tau;
  model.prototypes =
      class_means(forward_generator_batch(params, z_s).features, y_s, C);

  TrainReport& report = result.report;
  const bool run_alignment = flags.alignment_enabled() && hp.lambda > 0.0;

  if (hp.mode == TrainMode::Global) {
    PreparedAugmentation prep =
        flags.augmentation_enabled()
            ? prepare_augmentation(z_s, y_s, minority_rows, target.embeddings, gcfg, select,
                                   stats)
            : PreparedAugmentation{empty_set(d), empty_set(d), false};
    if (prep.kp_degenerate)
      stats.warnings.push_back(
          "cross-domain propagation degenerated to within-minority (empty target)");

    for (int epoch = 1; epoch <= hp.train_epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();

      const AugmentedPool pool =
          build_augmented_pool(z_s, y_s, C, prep.ep, prep.kp, acfg, mix_rng, select);

      const GenCache gen_pool = forward_generator_batch(params, pool.embeddings);
      PrototypeTable proto = class_means(gen_pool.features, pool.labels, C);
      proto.amended = (pool.n_ep + pool.n_kp + pool.n_mix) > 0;

      PseudoLabels pseudo;
      bool have_pseudo = false;
      GenCache gen_tgt;
      if (run_alignment && target.rows() > 0 && proto.fully_defined()) {
        gen_tgt = forward_generator_batch(params, target.embeddings);
        pseudo = pseudo_label(proto, gen_tgt.features, hp.tau, hp.pseudo_confidence);
        have_pseudo = true;
      }

      EpochRecord rec;
      rec.epoch = epoch;
      {
        const ClsCache cls_pool = forward_classifier_batch(params, gen_pool.features);
        const CrossEntropy ce = cross_entropy(cls_pool.probs, pool.labels);
        stats.log_clamps += ce.clamped;
        rec.m_s = ce.value;
      }
      if (run_alignment && have_pseudo) {
        const AlignmentTerms at =
            alignment_terms(gen_pool.features, pool.labels, gen_tgt.features, pseudo, C,
                            flags.use_cpa_intra, flags.use_cpa_inter);
        if (at.mmd_present) {
          rec.m_c = flags.use_cpa_intra ? at.m_c : 0.0;
          rec.m_d = (flags.use_cpa_inter && at.divergence_present) ? at.m_d : 0.0;
        } else if (stats.warnings.empty() ||
                   stats.warnings.back() != "alignment dropped: no commonly defined class") {
          stats.warnings.push_back("alignment dropped: no commonly defined class");
        }
      }
      rec.objective = rec.m_s + hp.lambda * (rec.m_c - rec.m_d);

      step_a(pool, params, opt, &stats.log_clamps);
      if (run_alignment && have_pseudo) {
        const StepBResult sb =
            step_b(pool, target.embeddings, pseudo, params, opt, hp, flags, &stats.log_clamps);
        if (sb.alignment_dropped)
          stats.warnings.push_back("step B alignment dropped: no commonly defined class");
      }

      if (target.labeled()) rec.metrics = evaluate(params, proto, hp.tau, target, split, {});
      rec.wall_ms = elapsed_ms(t0);
      report.epochs.push_back(std::move(rec));
      model.prototypes = std::move(proto);
    }

    assert(stats.source_graph_builds <= 1 && stats.cross_graph_builds <= 1 &&
           "global mode must reuse its graphs");
  } else {
    // Episodic mode: graphs and pools are rebuilt per episode over only that
    // episode's rows; prototypes and pseudo-labels still refresh once per
    // epoch, from the real kept rows.
    std::vector<std::vector<Index>> majority_by_class(static_cast<std::size_t>(C));
    std::vector<std::vector<Index>> minority_by_class;
    for (std::size_t i = 0; i < y_s.size(); ++i)
      if (!split.is_minority(y_s[i]))
        majority_by_class[static_cast<std::size_t>(y_s[i])].push_back(
            static_cast<Index>(i));
    for (int c : split.minority_classes) {
      std::vector<Index> rows;
      for (std::size_t i = 0; i < y_s.size(); ++i)
        if (y_s[i] == c) rows.push_back(static_cast<Index>(i));
      minority_by_class.push_back(std::move(rows));
    }

    int auto_episodes = 1;
    {
      long smallest = -1;
      for (const auto& rows : majority_by_class) {
        if (rows.empty()) continue;
        const long n = static_cast<long>(rows.size());
        if (smallest < 0 || n < smallest) smallest = n;
      }
      if (smallest > 0) auto_episodes = std::max<long>(1, smallest / hp.episode_p);
    }
    const int episodes =
        hp.episodes_per_epoch > 0 ? hp.episodes_per_epoch : auto_episodes;

    for (int epoch = 1; epoch <= hp.train_epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();

      PrototypeTable proto =
          class_means(forward_generator_batch(params, z_s).features, y_s, C);

      PseudoLabels pseudo;
      bool have_pseudo = false;
      if (run_alignment && target.rows() > 0 && proto.fully_defined()) {
        const GenCache gen_tgt = forward_generator_batch(params, target.embeddings);
        pseudo = pseudo_label(proto, gen_tgt.features, hp.tau, hp.pseudo_confidence);
        have_pseudo = true;
      }

      // Majority rows are consumed without replacement across the epoch.
      std::vector<std::vector<Index>> queues = majority_by_class;
      for (auto& rows : queues) episode_rng.shuffle(rows.begin(), rows.end());

      auto sample_episode = [&](int e) {
        std::vector<Index> rows;
        for (const auto& q : queues) {
          for (int i = 0; i < hp.episode_p && !q.empty(); ++i)
            rows.push_back(q[(static_cast<std::size_t>(e) * hp.episode_p + i) % q.size()]);
        }
        for (const auto& mrows : minority_by_class) {
          if (mrows.empty()) continue;
          if (static_cast<std::size_t>(hp.episode_q) <= mrows.size()) {
            std::vector<Index> pick = mrows;
            for (int i = 0; i < hp.episode_q; ++i) {
              const auto j = i + episode_rng.uniform_below(pick.size() - i);
              std::swap(pick[static_cast<std::size_t>(i)], pick[j]);
            }
            rows.insert(rows.end(), pick.begin(), pick.begin() + hp.episode_q);
          } else {
            for (int i = 0; i < hp.episode_q; ++i)
              rows.push_back(mrows[episode_rng.uniform_below(mrows.size())]);
          }
        }
        return rows;
      };

      auto sample_targets = [&]() {
        std::vector<Index> all(static_cast<std::size_t>(target.rows()));
        for (Index i = 0; i < target.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
        const std::size_t want =
            std::min<std::size_t>(all.size(), static_cast<std::size_t>(hp.episode_targets));
        for (std::size_t i = 0; i < want; ++i) {
          const auto j = i + episode_rng.uniform_below(all.size() - i);
          std::swap(all[i], all[j]);
        }
        all.resize(want);
        return all;
      };

      EpochRecord rec;
      rec.epoch = epoch;
      long a_steps = 0, b_steps = 0;

      auto run_episode = [&](int e, bool do_a, bool do_b) {
        const std::vector<Index> ep_rows = sample_episode(e);
        const Matrix z_e = gather_rows(z_s, ep_rows);
        const std::vector<int> y_e = gather_labels(y_s, ep_rows);
        std::vector<Index> minority_pos;
        for (std::size_t i = 0; i < y_e.size(); ++i)
          if (split.is_minority(y_e[i])) minority_pos.push_back(static_cast<Index>(i));

        const std::vector<Index> t_rows = sample_targets();
        const Matrix z_t = gather_rows(target.embeddings, t_rows);

        PreparedAugmentation prep =
            flags.augmentation_enabled()
                ? prepare_augmentation(z_e, y_e, minority_pos, z_t, gcfg, select, stats)
                : PreparedAugmentation{empty_set(d), empty_set(d), false};
        const AugmentedPool pool =
            build_augmented_pool(z_e, y_e, C, prep.ep, prep.kp, acfg, mix_rng, select);

        if (do_a) {
          rec.m_s += step_a(pool, params, opt, &stats.log_clamps);
          ++a_steps;
        }
        if (do_b && run_alignment && have_pseudo) {
          PseudoLabels pseudo_e;
          for (Index r : t_rows) {
            pseudo_e.label.push_back(pseudo.label[static_cast<std::size_t>(r)]);
            pseudo_e.confidence.push_back(pseudo.confidence[static_cast<std::size_t>(r)]);
            pseudo_e.accepted.push_back(pseudo.accepted[static_cast<std::size_t>(r)]);
          }
          const StepBResult sb =
              step_b(pool, z_t, pseudo_e, params, opt, hp, flags, &stats.log_clamps);
          rec.m_c += sb.m_c;
          rec.m_d += sb.m_d;
          ++b_steps;
        }
      };

      if (hp.epoch_level_alternation) {
        for (int e = 0; e < episodes; ++e) run_episode(e, true, false);
        for (int e = 0; e < episodes; ++e) run_episode(e, false, true);
      } else {
        for (int e = 0; e < episodes; ++e) run_episode(e, true, true);
      }

      if (a_steps > 0) rec.m_s /= static_cast<double>(a_steps);
      if (b_steps > 0) {
        rec.m_c /= static_cast<double>(b_steps);
        rec.m_d /= static_cast<double>(b_steps);
      }
      rec.objective = rec.m_s + hp.lambda * (rec.m_c - rec.m_d);

      if (target.labeled()) rec.metrics = evaluate(params, proto, hp.tau, target, split, {});
      rec.wall_ms = elapsed_ms(t0);
      report.epochs.push_back(std::move(rec));
      model.prototypes = std::move(proto);
    }
  }

  model.net = std::move(params);
  model.opt = std::move(opt);
  model.epochs_completed = hp.train_epochs;
  if (!report.epochs.empty()) {
    report.final_metrics = report.epochs.back().metrics;
  } else if (target.labeled()) {
    report.final_metrics =
        evaluate(model.net, model.prototypes, hp.tau, target, split, {});
  }
  return result;
}

}  // namespace fkt
