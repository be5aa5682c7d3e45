#include "fkt/network.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fkt/rng.hpp"

namespace fkt {

namespace {

constexpr double kLogClamp = 1e-12;

[[noreturn]] void fail(const std::string& msg) { throw Error("network", msg); }

Matrix row_softmax(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - peak).exp();
    probs.row(i) = e / e.sum();
  }
  return probs;
}

Matrix uniform_matrix(Index rows, Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  double* p = m.data();
  for (Index i = 0; i < m.size(); ++i) p[i] = rng.uniform(-bound, bound);
  return m;
}

double glorot_bound(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

void NetworkDims::validate() const {
  if (input < 1 || hidden < 1 || feature < 1 || cls_hidden < 1 || classes < 2)
    fail("invalid network dimensions");
}

NetworkGrads zero_grads(const NetworkDims& dims) {
  NetworkGrads g;
  g.gen.w1 = Matrix::Zero(dims.input, dims.hidden);
  g.gen.b1 = Vector::Zero(dims.hidden);
  g.gen.w2 = Matrix::Zero(dims.hidden, dims.feature);
  g.gen.b2 = Vector::Zero(dims.feature);
  g.cls.w1 = Matrix::Zero(dims.feature, dims.cls_hidden);
  g.cls.b1 = Vector::Zero(dims.cls_hidden);
  g.cls.w2 = Matrix::Zero(dims.cls_hidden, dims.classes);
  g.cls.c2 = Vector::Zero(dims.classes);
  return g;
}

NetworkParams init_params(const NetworkDims& dims, std::uint64_t seed) {
  dims.validate();
  Rng rng(seed);
  NetworkParams p;
  p.dims = dims;
  p.gen.w1 = uniform_matrix(dims.input, dims.hidden, glorot_bound(dims.input, dims.hidden), rng);
  p.gen.b1 = Vector::Zero(dims.hidden);
  p.gen.w2 =
      uniform_matrix(dims.hidden, dims.feature, glorot_bound(dims.hidden, dims.feature), rng);
  p.gen.b2 = Vector::Zero(dims.feature);
  p.cls.w1 = uniform_matrix(dims.feature, dims.cls_hidden,
                            glorot_bound(dims.feature, dims.cls_hidden), rng);
  p.cls.b1 = Vector::Zero(dims.cls_hidden);
  p.cls.w2 = uniform_matrix(dims.cls_hidden, dims.classes,
                            glorot_bound(dims.cls_hidden, dims.classes), rng);
  p.cls.c2 = Vector::Zero(dims.classes);
  return p;
}

GenCache forward_generator_batch(const NetworkParams& params, const Matrix& z) {
  GenCache cache;
  cache.pre1 = (z * params.gen.w1).rowwise() + params.gen.b1.transpose();
  cache.act1 = cache.pre1.cwiseMax(0.0);
  cache.features = (cache.act1 * params.gen.w2).rowwise() + params.gen.b2.transpose();
  if (!cache.features.allFinite()) fail("generator produced non-finite features");
  return cache;
}

ClsCache forward_classifier_batch(const NetworkParams& params, const Matrix& features) {
  ClsCache cache;
  cache.pre1 = (features * params.cls.w1).rowwise() + params.cls.b1.transpose();
  cache.act1 = cache.pre1.cwiseMax(0.0);
  cache.logits = (cache.act1 * params.cls.w2).rowwise() + params.cls.c2.transpose();
  if (!cache.logits.allFinite()) fail("classifier produced non-finite logits");
  cache.probs = row_softmax(cache.logits);
  return cache;
}

Vector forward_generator(const NetworkParams& params, const Vector& z) {
  if (!z.allFinite()) fail("non-finite generator input");
  return forward_generator_batch(params, z.transpose()).features.row(0).transpose();
}

Vector predict_neural(const NetworkParams& params, const Vector& f) {
  return forward_classifier_batch(params, f.transpose()).probs.row(0).transpose();
}

Matrix neural_probabilities(const NetworkParams& params, const Matrix& features) {
  return forward_classifier_batch(params, features).probs;
}

bool PrototypeTable::fully_defined() const {
  for (int c = 0; c < classes(); ++c)
    if (!defined(c)) return false;
  return true;
}

Matrix prototype_probabilities(const PrototypeTable& table, const Matrix& features,
                               double tau) {
  if (!table.fully_defined()) fail("prototype table has undefined classes");
  const int C = table.classes();
  Matrix unit_mu(C, table.mu.cols());
  for (int c = 0; c < C; ++c) {
    const double norm = table.mu.row(c).norm();
    if (norm <= 0.0) fail("zero-norm prototype for class " + std::to_string(c));
    unit_mu.row(c) = table.mu.row(c) / norm;
  }
  Matrix cosines(features.rows(), C);
  for (Index i = 0; i < features.rows(); ++i) {
    const double norm = features.row(i).norm();
    if (norm <= 0.0) fail("zero-norm feature vector (cosine undefined)");
    cosines.row(i) = (features.row(i) / norm) * unit_mu.transpose();
  }
  return row_softmax(tau * cosines);
}

Vector predict_prototype(const PrototypeTable& table, const Vector& f, double tau) {
  return prototype_probabilities(table, f.transpose(), tau).row(0).transpose();
}

CrossEntropy cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  const Index n = probs.rows();
  if (n == 0) fail("cross_entropy over an empty batch");
  if (static_cast<Index>(labels.size()) != n) fail("label count mismatch");

  CrossEntropy out;
  out.dlogits = probs;
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    double p = probs(i, y);
    if (p < kLogClamp) {
      p = kLogClamp;
      ++out.clamped;
    }
    total -= std::log(p);
    out.dlogits(i, y) -= 1.0;
  }
  out.value = total / static_cast<double>(n);
  out.dlogits /= static_cast<double>(n);
  return out;
}

ClassifierBackward backward_classifier(const NetworkParams& params, const ClsCache& cache,
                                       const Matrix& features, const Matrix& dlogits) {
  ClassifierBackward out;
  out.grads.w2 = cache.act1.transpose() * dlogits;
  out.grads.c2 = dlogits.colwise().sum().transpose();
  Matrix dact1 = dlogits * params.cls.w2.transpose();
  Matrix dpre1 = ((cache.pre1.array() > 0.0).cast<double>() * dact1.array()).matrix();
  out.grads.w1 = features.transpose() * dpre1;
  out.grads.b1 = dpre1.colwise().sum().transpose();
  out.dfeatures = dpre1 * params.cls.w1.transpose();
  return out;
}

GeneratorParams backward_generator(const NetworkParams& params, const GenCache& cache,
                                   const Matrix& z, const Matrix& dfeatures) {
  GeneratorParams g;
  g.w2 = cache.act1.transpose() * dfeatures;
  g.b2 = dfeatures.colwise().sum().transpose();
  Matrix dact1 = dfeatures * params.gen.w2.transpose();
  Matrix dpre1 = ((cache.pre1.array() > 0.0).cast<double>() * dact1.array()).matrix();
  g.w1 = z.transpose() * dpre1;
  g.b1 = dpre1.colwise().sum().transpose();
  return g;
}

SupervisedLoss supervised_loss(const Matrix& z, const std::vector<int>& labels,
                               const NetworkParams& params) {
  const GenCache gen = forward_generator_batch(params, z);
  const ClsCache cls = forward_classifier_batch(params, gen.features);
  const CrossEntropy ce = cross_entropy(cls.probs, labels);

  SupervisedLoss out;
  out.value = ce.value;
  out.clamped = ce.clamped;
  ClassifierBackward cb = backward_classifier(params, cls, gen.features, ce.dlogits);
  out.grads.cls = std::move(cb.grads);
  out.grads.gen = backward_generator(params, gen, z, cb.dfeatures);
  return out;
}

double supervised_loss_value(const Matrix& z, const std::vector<int>& labels,
                             const NetworkParams& params) {
  const GenCache gen = forward_generator_batch(params, z);
  const ClsCache cls = forward_classifier_batch(params, gen.features);
  return cross_entropy(cls.probs, labels).value;
}

OptimizerState OptimizerState::create(const NetworkParams& params) {
  OptimizerState state;
  NetworkGrads dummy = zero_grads(params.dims);
  auto& mutable_params = const_cast<NetworkParams&>(params);
  for_each_block(mutable_params, dummy,
                 [&](const char*, double*, const double*, Index n, bool) {
                   state.m.push_back(Vector::Zero(n));
                   state.v.push_back(Vector::Zero(n));
                   state.steps.push_back(0);
                 });
  return state;
}

void adam_step(NetworkParams& params, const NetworkGrads& grads, OptimizerState& state,
               UpdateScope scope) {
  std::size_t block = 0;
  for_each_block(params, grads,
                 [&](const char* name, double* p, const double* g, Index n, bool is_gen) {
                   const std::size_t b = block++;
                   if (scope == UpdateScope::GeneratorOnly && !is_gen) return;

                   Eigen::Map<const Vector> grad(g, n);
                   if (!grad.allFinite())
                     fail(std::string("non-finite gradient in block '") + name + "'");

                   Vector& m = state.m[b];
                   Vector& v = state.v[b];
                   const long t = ++state.steps[b];
                   m = state.beta1 * m + (1.0 - state.beta1) * grad;
                   v = (state.beta2 * v.array() +
                        (1.0 - state.beta2) * grad.array().square())
                           .matrix();
                   const double mc = 1.0 - std::pow(state.beta1, static_cast<double>(t));
                   const double vc = 1.0 - std::pow(state.beta2, static_cast<double>(t));
                   Eigen::Map<Vector> param(p, n);
                   param.array() -=
                       state.lr * (m.array() / mc) / ((v.array() / vc).sqrt() + state.eps);
                 });
}

// --- checkpoint ----------------------------------------------------------------

namespace {

void write_block(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "block " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_block(std::ostream& out, const std::string& name, const Vector& v) {
  write_block(out, name, Matrix(v.transpose()));
}

Matrix read_block(std::istream& in, const std::string& expected_name, long& lineno) {
  std::string line;
  if (!std::getline(in, line)) fail("checkpoint truncated before block " + expected_name);
  ++lineno;
  std::istringstream head(line);
  std::string tag, name;
  long rows = 0, cols = 0;
  head >> tag >> name >> rows >> cols;
  if (tag != "block" || name != expected_name || rows < 0 || cols < 0 || head.fail())
    fail("checkpoint line " + std::to_string(lineno) + ": expected block " + expected_name);
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) fail("checkpoint truncated in block " + expected_name);
    ++lineno;
    std::size_t pos = 0;
    for (long j = 0; j < cols; ++j) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ') ++end;
      double value = 0.0;
      if (end == pos || !parse_double(std::string_view(line).substr(pos, end - pos), value))
        fail("checkpoint line " + std::to_string(lineno) + ": bad value in " + expected_name);
      m(i, j) = value;
      pos = end;
    }
  }
  return m;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write checkpoint '" + path + "'");
  const NetworkDims& d = state.net.dims;
  out << "#fkt-checkpoint v1 input=" << d.input << " hidden=" << d.hidden
      << " feature=" << d.feature << " cls_hidden=" << d.cls_hidden
      << " classes=" << d.classes << " seed=" << state.seed
      << " epochs=" << state.epochs_completed << " tau=" << format_double(state.tau)
      << " lr=" << format_double(state.opt.lr)
      << " amended=" << (state.prototypes.amended ? 1 : 0) << '\n';

  write_block(out, "gen.w1", state.net.gen.w1);
  write_block(out, "gen.b1", state.net.gen.b1);
  write_block(out, "gen.w2", state.net.gen.w2);
  write_block(out, "gen.b2", state.net.gen.b2);
  write_block(out, "cls.w1", state.net.cls.w1);
  write_block(out, "cls.b1", state.net.cls.b1);
  write_block(out, "cls.w2", state.net.cls.w2);
  write_block(out, "cls.c2", state.net.cls.c2);

  write_block(out, "proto.mu", state.prototypes.mu);
  Matrix counts(1, static_cast<Index>(state.prototypes.counts.size()));
  for (std::size_t c = 0; c < state.prototypes.counts.size(); ++c)
    counts(0, static_cast<Index>(c)) = static_cast<double>(state.prototypes.counts[c]);
  write_block(out, "proto.counts", counts);

  for (std::size_t b = 0; b < state.opt.m.size(); ++b)
    write_block(out, "opt.m." + std::to_string(b), state.opt.m[b]);
  for (std::size_t b = 0; b < state.opt.v.size(); ++b)
    write_block(out, "opt.v." + std::to_string(b), state.opt.v[b]);
  Matrix steps(1, static_cast<Index>(state.opt.steps.size()));
  for (std::size_t b = 0; b < state.opt.steps.size(); ++b)
    steps(0, static_cast<Index>(b)) = static_cast<double>(state.opt.steps[b]);
  write_block(out, "opt.steps", steps);

  if (!out) fail("write failed for checkpoint '" + path + "'");
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail("empty checkpoint '" + path + "'");
  long lineno = 1;

  std::istringstream head(line);
  std::string magic, version;
  head >> magic >> version;
  if (magic != "#fkt-checkpoint" || version != "v1")
    fail("unrecognized checkpoint header in '" + path + "'");

  ModelState state;
  NetworkDims dims;
  int amended = 0;
  std::string token;
  while (head >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) fail("malformed checkpoint header token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    long lv = 0;
    double dv = 0.0;
    if (key == "input" && parse_int(value, lv)) dims.input = static_cast<int>(lv);
    else if (key == "hidden" && parse_int(value, lv)) dims.hidden = static_cast<int>(lv);
    else if (key == "feature" && parse_int(value, lv)) dims.feature = static_cast<int>(lv);
    else if (key == "cls_hidden" && parse_int(value, lv)) dims.cls_hidden = static_cast<int>(lv);
    else if (key == "classes" && parse_int(value, lv)) dims.classes = static_cast<int>(lv);
    else if (key == "seed" && parse_int(value, lv)) state.seed = static_cast<std::uint64_t>(lv);
    else if (key == "epochs" && parse_int(value, lv)) state.epochs_completed = lv;
    else if (key == "tau" && parse_double(value, dv)) state.tau = dv;
    else if (key == "lr" && parse_double(value, dv)) state.opt.lr = dv;
    else if (key == "amended" && parse_int(value, lv)) amended = static_cast<int>(lv);
    else fail("malformed checkpoint header token '" + token + "'");
  }
  dims.validate();
  state.net.dims = dims;

  state.net.gen.w1 = read_block(in, "gen.w1", lineno);
  state.net.gen.b1 = read_block(in, "gen.b1", lineno).row(0).transpose();
  state.net.gen.w2 = read_block(in, "gen.w2", lineno);
  state.net.gen.b2 = read_block(in, "gen.b2", lineno).row(0).transpose();
  state.net.cls.w1 = read_block(in, "cls.w1", lineno);
  state.net.cls.b1 = read_block(in, "cls.b1", lineno).row(0).transpose();
  state.net.cls.w2 = read_block(in, "cls.w2", lineno);
  state.net.cls.c2 = read_block(in, "cls.c2", lineno).row(0).transpose();

  state.prototypes.mu = read_block(in, "proto.mu", lineno);
  const Matrix counts = read_block(in, "proto.counts", lineno);
  state.prototypes.counts.resize(static_cast<std::size_t>(counts.cols()));
  for (Index c = 0; c < counts.cols(); ++c)
    state.prototypes.counts[static_cast<std::size_t>(c)] = static_cast<long>(counts(0, c));
  state.prototypes.amended = amended != 0;

  const double parsed_lr = state.opt.lr;
  state.opt = OptimizerState::create(state.net);
  state.opt.lr = parsed_lr;
  for (std::size_t b = 0; b < state.opt.m.size(); ++b)
    state.opt.m[b] = read_block(in, "opt.m." + std::to_string(b), lineno).row(0).transpose();
  for (std::size_t b = 0; b < state.opt.v.size(); ++b)
    state.opt.v[b] = read_block(in, "opt.v." + std::to_string(b), lineno).row(0).transpose();
  const Matrix steps = read_block(in, "opt.steps", lineno);
  for (std::size_t b = 0; b < state.opt.steps.size(); ++b)
    state.opt.steps[b] = static_cast<long>(steps(0, static_cast<Index>(b)));

  return state;
}

}  // namespace fkt
