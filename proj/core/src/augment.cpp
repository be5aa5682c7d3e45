#include "fkt/augment.hpp"

namespace fkt {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Real: return "REAL";
    case Provenance::EpSource: return "EP";
    case Provenance::KpCross: return "KP";
    case Provenance::Mix: return "MIX";
  }
  return "?";
}

double sample_beta(double a, double b, Rng& rng) { return rng.beta(a, b); }

Vector mix(const Vector& z_s, const Vector& z_o, double gamma) {
  if (z_s.size() != z_o.size())
    throw Error("augment", "mix parents have different dimensions");
  return (1.0 - gamma) * z_s + gamma * z_o;
}

AugmentedPool build_augmented_pool(const Matrix& z_real, const std::vector<int>& labels_real,
                                   int class_count, const PropagatedSet& ep,
                                   const PropagatedSet& kp, const AugmentationConfig& cfg,
                                   Rng& rng, const AugmentSelection& select) {
  if (!(cfg.beta_a > 0.0) || !(cfg.beta_b > 0.0))
    throw Error("augment", "beta parameters must be positive");
  if (cfg.mix_count < 0) throw Error("augment", "mix_count must be nonnegative");
  if (ep.embeddings.rows() != kp.embeddings.rows() && select.include_mix && cfg.mix_count > 0)
    throw Error("augment", "EP and KP sets must pair one-to-one for mixup");

  const Index d = z_real.cols();
  const Index n_seed = ep.embeddings.rows();
  const Index n_ep = select.include_ep ? n_seed : 0;
  const Index n_kp = select.include_kp ? kp.embeddings.rows() : 0;
  const Index n_mix = select.include_mix ? n_seed * cfg.mix_count : 0;

  AugmentedPool pool;
  pool.class_count = class_count;
  pool.n_real = z_real.rows();
  pool.n_ep = n_ep;
  pool.n_kp = n_kp;
  pool.n_mix = n_mix;

  const Index total = pool.n_real + n_ep + n_kp + n_mix;
  pool.embeddings.resize(total, d);
  pool.labels.reserve(total);
  pool.provenance.reserve(total);
  pool.seed_row.reserve(total);
  pool.gamma.reserve(total);

  Index row = 0;
  for (Index i = 0; i < z_real.rows(); ++i, ++row) {
    pool.embeddings.row(row) = z_real.row(i);
    pool.labels.push_back(labels_real[static_cast<std::size_t>(i)]);
    pool.provenance.push_back(Provenance::Real);
    pool.seed_row.push_back(i);
    pool.gamma.push_back(0.0);
  }
  if (select.include_ep) {
    for (Index i = 0; i < n_seed; ++i, ++row) {
      pool.embeddings.row(row) = ep.embeddings.row(i);
      pool.labels.push_back(ep.labels[static_cast<std::size_t>(i)]);
      pool.provenance.push_back(Provenance::EpSource);
      pool.seed_row.push_back(ep.seed_rows[static_cast<std::size_t>(i)]);
      pool.gamma.push_back(0.0);
    }
  }
  if (select.include_kp) {
    for (Index i = 0; i < kp.embeddings.rows(); ++i, ++row) {
      pool.embeddings.row(row) = kp.embeddings.row(i);
      pool.labels.push_back(kp.labels[static_cast<std::size_t>(i)]);
      pool.provenance.push_back(Provenance::KpCross);
      pool.seed_row.push_back(kp.seed_rows[static_cast<std::size_t>(i)]);
      pool.gamma.push_back(0.0);
    }
  }
  if (select.include_mix) {
    for (Index i = 0; i < n_seed; ++i) {
      const Vector parent_s = ep.embeddings.row(i).transpose();
      const Vector parent_o = kp.embeddings.row(i).transpose();
      for (int m = 0; m < cfg.mix_count; ++m, ++row) {
        const double g = sample_beta(cfg.beta_a, cfg.beta_b, rng);
        pool.embeddings.row(row) = mix(parent_s, parent_o, g).transpose();
        pool.labels.push_back(ep.labels[static_cast<std::size_t>(i)]);
        pool.provenance.push_back(Provenance::Mix);
        pool.seed_row.push_back(ep.seed_rows[static_cast<std::size_t>(i)]);
        pool.gamma.push_back(g);
      }
    }
  }
  return pool;
}

}  // namespace fkt
