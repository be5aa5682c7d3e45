#include "fkt/graph.hpp"

#include <cmath>

namespace fkt {

namespace {

constexpr double kDegenerateVariance = 1e-12;

Matrix pairwise_squared_distances(const Matrix& z) {
  const Index n = z.rows();
  const Vector sq = z.rowwise().squaredNorm();
  Matrix d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * (z * z.transpose());
  // Rounding can leave tiny negatives on near-duplicate rows.
  return d2.cwiseMax(0.0);
}

}  // namespace

std::pair<Matrix, double> build_adjacency(const Matrix& z, SigmaMode mode) {
  const Index n = z.rows();
  if (n < 1) throw Error("graph", "adjacency needs at least one row");
  if (!z.allFinite()) throw Error("graph", "non-finite embeddings");

  Matrix d2 = pairwise_squared_distances(z);

  double sigma2 = 1.0;
  const Index pairs = n * (n - 1) / 2;
  if (pairs > 0) {
    double mean = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        mean += (mode == SigmaMode::VarianceOfSquaredDistances) ? d2(i, j)
                                                                : std::sqrt(d2(i, j));
    mean /= static_cast<double>(pairs);
    double var = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) {
        const double s = (mode == SigmaMode::VarianceOfSquaredDistances)
                             ? d2(i, j)
                             : std::sqrt(d2(i, j));
        var += (s - mean) * (s - mean);
      }
    var /= static_cast<double>(pairs);

    if (var > kDegenerateVariance) {
      sigma2 = var;
    } else {
      const double mean_sq =
          (mode == SigmaMode::VarianceOfSquaredDistances) ? mean : mean * mean;
      sigma2 = mean_sq > kDegenerateVariance ? mean_sq : 1.0;
    }
  }

  Matrix a = (-d2 / sigma2).array().exp();
  a.diagonal().setZero();
  return {std::move(a), sigma2};
}

Matrix build_laplacian(const Matrix& a) {
  const Index n = a.rows();
  Vector inv_sqrt_degree(n);
  for (Index i = 0; i < n; ++i) {
    const double deg = a.row(i).sum();
    inv_sqrt_degree[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  return inv_sqrt_degree.asDiagonal() * a * inv_sqrt_degree.asDiagonal();
}

Matrix build_propagator(const Matrix& laplacian, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("graph", "alpha must lie in (0,1)");
  const Index n = laplacian.rows();
  const Matrix system = Matrix::Identity(n, n) - alpha * laplacian;
  Eigen::PartialPivLU<Matrix> lu(system);
  Matrix h = lu.solve(Matrix::Identity(n, n));
  const double residual = (h * system - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!h.allFinite() || residual > 1e-9)
    throw Error("graph", "propagator solve failed (residual " + format_double(residual) + ")");
  return h;
}

namespace {

PropagationGraph build_graph(const Matrix& z, const GraphConfig& cfg,
                             std::vector<RowOrigin> origins) {
  PropagationGraph g;
  auto [a, sigma2] = build_adjacency(z, cfg.sigma_mode);
  g.adjacency = std::move(a);
  g.bandwidth = sigma2;
  g.laplacian = build_laplacian(g.adjacency);
  g.propagator = build_propagator(g.laplacian, cfg.alpha);
  g.alpha = cfg.alpha;
  g.row_index = std::move(origins);
  return g;
}

// z_tilde_i = sum_{j in cols} H_ij z_j, optionally divided by the same
// partial row sum so the result stays in the inputs' convex hull.
Matrix propagate_rows(const PropagationGraph& graph, const Matrix& z,
                      const std::vector<Index>& rows, Index col_begin, Index col_end,
                      bool row_normalize) {
  Matrix out(static_cast<Index>(rows.size()), z.cols());
  const Index width = col_end - col_begin;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index i = rows[k];
    const auto weights = graph.propagator.row(i).segment(col_begin, width);
    Vector acc = (weights * z.middleRows(col_begin, width)).transpose();
    if (row_normalize) {
      const double total = weights.sum();
      if (total <= 0.0) throw Error("graph", "nonpositive propagation row sum");
      acc /= total;
    }
    out.row(static_cast<Index>(k)) = acc.transpose();
  }
  return out;
}

}  // namespace

PropagationGraph build_source_graph(const Matrix& z_source, const GraphConfig& cfg) {
  std::vector<RowOrigin> origins(static_cast<std::size_t>(z_source.rows()));
  for (Index i = 0; i < z_source.rows(); ++i)
    origins[static_cast<std::size_t>(i)] = {RowOrigin::Set::Source, i};
  return build_graph(z_source, cfg, std::move(origins));
}

PropagationGraph build_cross_graph(const Matrix& z_minority, const Matrix& z_target,
                                   const GraphConfig& cfg) {
  if (z_target.rows() > 0 && z_minority.cols() != z_target.cols())
    throw Error("graph", "minority and target dimensions differ");
  Matrix stacked(z_minority.rows() + z_target.rows(), z_minority.cols());
  stacked.topRows(z_minority.rows()) = z_minority;
  if (z_target.rows() > 0) stacked.bottomRows(z_target.rows()) = z_target;

  std::vector<RowOrigin> origins;
  origins.reserve(static_cast<std::size_t>(stacked.rows()));
  for (Index i = 0; i < z_minority.rows(); ++i)
    origins.push_back({RowOrigin::Set::Source, i});
  for (Index i = 0; i < z_target.rows(); ++i)
    origins.push_back({RowOrigin::Set::Target, i});
  return build_graph(stacked, cfg, std::move(origins));
}

PropagatedSet propagate_within_source(const PropagationGraph& graph, const Matrix& z_source,
                                      const std::vector<int>& labels,
                                      const std::vector<Index>& minority_rows,
                                      const GraphConfig& cfg) {
  if (graph.propagator.rows() != z_source.rows())
    throw Error("graph", "graph size does not match the source matrix");

  PropagatedSet out;
  out.seed_rows = minority_rows;
  out.labels.reserve(minority_rows.size());
  for (Index i : minority_rows) out.labels.push_back(labels[static_cast<std::size_t>(i)]);

  if (minority_rows.empty()) {
    out.embeddings.resize(0, z_source.cols());
    return out;
  }

  if (cfg.ep_restrict_to_minority) {
    // Sum only over the minority columns of H.
    Matrix restricted(static_cast<Index>(minority_rows.size()), z_source.cols());
    for (std::size_t k = 0; k < minority_rows.size(); ++k) {
      const Index i = minority_rows[k];
      Vector acc = Vector::Zero(z_source.cols());
      double total = 0.0;
      for (Index j : minority_rows) {
        const double w = graph.propagator(i, j);
        acc += w * z_source.row(j).transpose();
        total += w;
      }
      if (cfg.row_normalize) {
        if (total <= 0.0) throw Error("graph", "nonpositive propagation row sum");
        acc /= total;
      }
      restricted.row(static_cast<Index>(k)) = acc.transpose();
    }
    out.embeddings = std::move(restricted);
  } else {
    out.embeddings = propagate_rows(graph, z_source, minority_rows, 0, z_source.rows(),
                                    cfg.row_normalize);
  }
  return out;
}

PropagatedSet propagate_cross_domain(const PropagationGraph& graph, const Matrix& z_minority,
                                     const std::vector<int>& minority_labels,
                                     const Matrix& z_target, const GraphConfig& cfg) {
  const Index n_f = z_minority.rows();
  const Index n_t = z_target.rows();
  if (graph.propagator.rows() != n_f + n_t)
    throw Error("graph", "graph size does not match minority+target stack");

  Matrix stacked(n_f + n_t, z_minority.cols());
  stacked.topRows(n_f) = z_minority;
  if (n_t > 0) stacked.bottomRows(n_t) = z_target;

  std::vector<Index> rows(static_cast<std::size_t>(n_f));
  for (Index i = 0; i < n_f; ++i) rows[static_cast<std::size_t>(i)] = i;

  PropagatedSet out;
  out.embeddings = propagate_rows(graph, stacked, rows, 0, n_f + n_t, cfg.row_normalize);
  out.labels = minority_labels;
  out.seed_rows = std::move(rows);
  out.degenerate_no_target = (n_t == 0);
  return out;
}

}  // namespace fkt
