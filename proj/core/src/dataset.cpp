#include "fkt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "fkt/rng.hpp"

namespace fkt {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("dataset", msg); }

[[noreturn]] void fail_at(const std::string& path, long line, const std::string& msg) {
  fail(path + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Header tokens look like "n=3"; returns the value part or fails.
std::string_view header_value(std::string_view token, std::string_view key,
                              const std::string& path) {
  if (token.size() <= key.size() + 1 || token.substr(0, key.size()) != key ||
      token[key.size()] != '=') {
    fail_at(path, 1, "malformed header: expected '" + std::string(key) +
                         "=<value>', got '" + std::string(token) + "'");
  }
  return token.substr(key.size() + 1);
}

}  // namespace

std::string to_string(Domain d) {
  return d == Domain::Source ? "source" : "target";
}

void EmbeddingDataset::validate() const {
  if (rows() < 1) fail("dataset must contain at least one row");
  if (dim() < 1) fail("embedding dimension must be at least 1");
  if (class_count < 2) fail("class_count must be at least 2");
  if (!embeddings.allFinite()) fail("embedding matrix contains non-finite values");
  if (labeled()) {
    if (static_cast<Index>(labels.size()) != rows())
      fail("label count does not match row count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= class_count)
        fail("label " + std::to_string(labels[i]) + " out of range at row " +
             std::to_string(i));
    }
  } else if (domain == Domain::Source) {
    fail("source datasets must be fully labeled");
  }
}

bool SplitSpec::is_minority(int c) const {
  return std::find(minority_classes.begin(), minority_classes.end(), c) !=
         minority_classes.end();
}

std::vector<Index> SplitResult::kept_rows() const {
  std::vector<Index> kept;
  kept.reserve(majority_rows.size() + minority_rows.size());
  kept.insert(kept.end(), majority_rows.begin(), majority_rows.end());
  kept.insert(kept.end(), minority_rows.begin(), minority_rows.end());
  std::sort(kept.begin(), kept.end());
  return kept;
}

EmbeddingDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");

  auto tokens = split_ws(line);
  if (tokens.size() != 6 || tokens[0] != "#fkt" || tokens[1] != "v1")
    fail_at(path, 1, "malformed header: expected '#fkt v1 n=<int> d=<int> c=<int> domain=<source|target>'");

  long n = 0, d = 0, c = 0;
  if (!parse_int(header_value(tokens[2], "n", path), n) || n < 1)
    fail_at(path, 1, "invalid row count in header");
  if (!parse_int(header_value(tokens[3], "d", path), d) || d < 1)
    fail_at(path, 1, "invalid dimension in header");
  if (!parse_int(header_value(tokens[4], "c", path), c) || c < 2)
    fail_at(path, 1, "invalid class count in header");

  EmbeddingDataset ds;
  const auto dom = header_value(tokens[5], "domain", path);
  if (dom == "source") {
    ds.domain = Domain::Source;
  } else if (dom == "target") {
    ds.domain = Domain::Target;
  } else {
    fail_at(path, 1, "invalid domain '" + std::string(dom) + "'");
  }
  ds.class_count = static_cast<int>(c);
  ds.embeddings.resize(n, d);

  std::vector<int> labels;
  labels.reserve(n);
  long unlabeled = 0;

  for (long row = 0; row < n; ++row) {
    const long lineno = row + 2;
    if (!std::getline(in, line))
      fail_at(path, lineno, "unexpected end of file: expected " + std::to_string(n) + " rows");

    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail_at(path, lineno, "missing tab between label and values");

    const std::string_view label_text = std::string_view(line).substr(0, tab);
    if (label_text == "-") {
      ++unlabeled;
      labels.push_back(-1);
    } else {
      long value = 0;
      if (!parse_int(label_text, value))
        fail_at(path, lineno, "invalid label '" + std::string(label_text) + "'");
      if (value < 0 || value >= c)
        fail_at(path, lineno, "label " + std::to_string(value) + " out of range [0, " +
                                  std::to_string(c) + ")");
      labels.push_back(static_cast<int>(value));
    }

    const auto values = split_ws(std::string_view(line).substr(tab + 1));
    if (static_cast<long>(values.size()) != d)
      fail_at(path, lineno, "row has " + std::to_string(values.size()) +
                                " values, expected " + std::to_string(d));
    for (long j = 0; j < d; ++j) {
      double v = 0.0;
      if (!parse_double(values[j], v))
        fail_at(path, lineno, "invalid value '" + std::string(values[j]) + "'");
      if (!std::isfinite(v))
        fail_at(path, lineno, "non-finite value in column " + std::to_string(j));
      ds.embeddings(row, j) = v;
    }
  }

  while (std::getline(in, line)) {
    if (!split_ws(line).empty())
      fail(path + ": trailing content after " + std::to_string(n) + " rows");
  }

  if (unlabeled == 0) {
    ds.labels = std::move(labels);
  } else if (unlabeled == n) {
    if (ds.domain == Domain::Source) fail(path + ": source datasets must be fully labeled");
  } else {
    fail(path + ": mixed labeled and unlabeled rows (label every row or none)");
  }

  ds.validate();
  return ds;
}

std::string serialize_dataset(const EmbeddingDataset& ds) {
  std::ostringstream out;
  out << "#fkt v1 n=" << ds.rows() << " d=" << ds.dim() << " c=" << ds.class_count
      << " domain=" << to_string(ds.domain) << '\n';
  for (Index i = 0; i < ds.rows(); ++i) {
    if (ds.labeled())
      out << ds.labels[static_cast<std::size_t>(i)];
    else
      out << '-';
    out << '\t';
    for (Index j = 0; j < ds.dim(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(ds.embeddings(i, j));
    }
    out << '\n';
  }
  return out.str();
}

void save_dataset(const EmbeddingDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write '" + path + "'");
  out << serialize_dataset(ds);
  if (!out) fail("write failed for '" + path + "'");
}

SplitResult apply_split(const EmbeddingDataset& ds, const SplitSpec& spec,
                        std::uint64_t seed) {
  ds.validate();
  if (ds.domain != Domain::Source) fail("apply_split expects a source dataset");
  if (spec.shots < 1) fail("shots must be at least 1");

  std::unordered_set<int> minority;
  for (int c : spec.minority_classes) {
    if (c < 0 || c >= ds.class_count)
      fail("minority class " + std::to_string(c) + " out of range");
    if (!minority.insert(c).second)
      fail("duplicate minority class " + std::to_string(c));
  }

  SplitResult result;
  Rng rng(seed);

  for (Index i = 0; i < ds.rows(); ++i) {
    if (!minority.contains(ds.labels[static_cast<std::size_t>(i)]))
      result.majority_rows.push_back(i);
  }

  for (int c : spec.minority_classes) {
    std::vector<Index> rows;
    for (Index i = 0; i < ds.rows(); ++i) {
      if (ds.labels[static_cast<std::size_t>(i)] == c) rows.push_back(i);
    }
    if (rows.empty())
      fail("minority class " + std::to_string(c) + " has no source rows");

    const std::size_t keep = std::min<std::size_t>(rows.size(), spec.shots);
    // Partial Fisher-Yates: the first `keep` slots end up uniform without
    // replacement.
    for (std::size_t i = 0; i < keep; ++i) {
      const auto j = i + rng.uniform_below(rows.size() - i);
      std::swap(rows[i], rows[j]);
    }
    std::vector<Index> selected(rows.begin(), rows.begin() + keep);
    std::vector<Index> dropped(rows.begin() + keep, rows.end());
    std::sort(selected.begin(), selected.end());
    std::sort(dropped.begin(), dropped.end());
    result.minority_rows.insert(result.minority_rows.end(), selected.begin(), selected.end());
    result.dropped_minority_rows.insert(result.dropped_minority_rows.end(), dropped.begin(),
                                        dropped.end());
  }

  return result;
}

std::pair<EmbeddingDataset, EmbeddingDataset> generate_synthetic(
    const SyntheticTaskSpec& spec) {
  if (spec.class_count < 2) fail("synthetic task needs at least 2 classes");
  if (spec.dim < 2) fail("synthetic task needs dimension at least 2");
  if (spec.per_class_source < 1 || spec.per_class_target < 1)
    fail("per-class sample counts must be positive");
  if (spec.shots < 1) fail("shots must be at least 1");
  for (int c : spec.minority_classes) {
    if (c < 0 || c >= spec.class_count)
      fail("minority class " + std::to_string(c) + " out of range");
  }

  const int C = spec.class_count;
  const int d = spec.dim;
  Rng rng(spec.seed);

  auto random_unit = [&]() {
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.normal();
    const double norm = v.norm();
    return norm > 0 ? Vector(v / norm) : Vector(Vector::Unit(d, 0));
  };

  Matrix centers(C, d);
  for (int c = 0; c < C; ++c) centers.row(c) = (spec.separation * random_unit()).transpose();

  // Random orthogonal frame Q, then a block rotation by `angle` in the
  // planes spanned by consecutive frame axes: angle 0 gives the identity.
  Matrix gauss(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) gauss(i, j) = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(gauss).householderQ();

  Matrix block = Matrix::Identity(d, d);
  const double cs = std::cos(spec.shift.angle);
  const double sn = std::sin(spec.shift.angle);
  for (int p = 0; p + 1 < d; p += 2) {
    block(p, p) = cs;
    block(p, p + 1) = -sn;
    block(p + 1, p) = sn;
    block(p + 1, p + 1) = cs;
  }
  const Matrix rotation = q * block * q.transpose();

  const Vector offset = spec.shift.translation * random_unit();

  auto gaussian_row = [&](const Vector& mean) {
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = mean[j] + rng.normal();
    return v;
  };

  EmbeddingDataset source;
  source.domain = Domain::Source;
  source.class_count = C;
  source.embeddings.resize(static_cast<Index>(C) * spec.per_class_source, d);
  source.labels.reserve(source.embeddings.rows());
  Index row = 0;
  for (int c = 0; c < C; ++c) {
    const Vector mean = centers.row(c).transpose();
    for (int i = 0; i < spec.per_class_source; ++i, ++row) {
      source.embeddings.row(row) = gaussian_row(mean).transpose();
      source.labels.push_back(c);
    }
  }

  EmbeddingDataset target;
  target.domain = Domain::Target;
  target.class_count = C;
  target.embeddings.resize(static_cast<Index>(C) * spec.per_class_target, d);
  target.labels.reserve(target.embeddings.rows());
  row = 0;
  for (int c = 0; c < C; ++c) {
    const Vector mean = centers.row(c).transpose();
    for (int i = 0; i < spec.per_class_target; ++i, ++row) {
      Vector z = rotation * gaussian_row(mean) + offset;
      for (int j = 0; j < d; ++j) z[j] += spec.shift.noise_sd * rng.normal();
      target.embeddings.row(row) = z.transpose();
      target.labels.push_back(c);
    }
  }

  source.validate();
  target.validate();
  return {std::move(source), std::move(target)};
}

}  // namespace fkt
