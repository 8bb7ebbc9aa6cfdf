#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace small {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Labeled binary-classification data. Rows of `features` are examples;
/// labels are strictly -1 or +1.
struct Dataset {
  Matrix features;                         // m x n
  Vector labels;                           // length m, entries in {-1,+1}
  std::vector<std::string> feature_names;  // length n
  std::string id;

  Eigen::Index row_count() const { return features.rows(); }
  Eigen::Index col_count() const { return features.cols(); }

  std::vector<int> positive_indices() const {
    std::vector<int> out;
    for (int i = 0; i < labels.size(); ++i)
      if (labels[i] > 0) out.push_back(i);
    return out;
  }
  std::vector<int> negative_indices() const {
    std::vector<int> out;
    for (int i = 0; i < labels.size(); ++i)
      if (labels[i] < 0) out.push_back(i);
    return out;
  }
};

/// Per-column affine transform: z = (x - mean) / scale.
struct Standardizer {
  Vector mean;
  Vector scale;  // strictly positive; constant columns floored at 1e-12
};

struct SplitPlan {
  enum class Kind { holdout, kfold };
  Kind kind = Kind::holdout;
  std::uint64_t seed = 0;
  double ratio = 0.8;  // holdout train fraction, in (0,1)
  int folds = 5;       // kfold
};

struct IndexSplit {
  std::vector<int> train;
  std::vector<int> test;
};

struct SplitSet {
  std::vector<IndexSplit> parts;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.emplace_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.emplace_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && !cell.empty();
}

// Deterministic Fisher-Yates; avoids std::shuffle so index orders are
// pinned to the seed, not to the standard library version.
inline void seeded_shuffle(std::vector<int>& idx, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace detail

/// Reads a CSV file with one header row. `label_column` selects the label
/// column by name, or "last" for the final column. Labels may be -1/+1 or
/// 0/1; 0 is remapped to -1. Rejects non-numeric and non-finite cells.
inline Dataset load_csv(const std::string& path, const std::string& label_column = "last") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file: " + path);
  std::vector<std::string> header = detail::split_line(line);
  if (header.empty()) throw std::runtime_error("load_csv: empty header: " + path);

  int label_idx = -1;
  if (label_column == "last") {
    label_idx = static_cast<int>(header.size()) - 1;
  } else {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == label_column) label_idx = static_cast<int>(c);
    if (label_idx < 0)
      throw std::runtime_error("load_csv: label column '" + label_column + "' not found in " + path);
  }
  if (header.size() < 2)
    throw std::runtime_error("load_csv: need at least one feature column besides the label: " + path);

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<int>(c) != label_idx) names.push_back(header[c]);

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells = detail::split_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "load_csv: row " << line_no << " has " << cells.size() << " cells, expected "
          << header.size() << " (" << path << ")";
      throw std::runtime_error(msg.str());
    }
    std::vector<double> row;
    row.reserve(names.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "load_csv: non-numeric cell '" << cells[c] << "' at row " << line_no
            << ", column '" << header[c] << "' (" << path << ")";
        throw std::runtime_error(msg.str());
      }
      if (static_cast<int>(c) == label_idx) {
        if (v == -1.0 || v == 1.0) {
          labels.push_back(v);
        } else if (v == 0.0) {
          labels.push_back(-1.0);
        } else {
          std::ostringstream msg;
          msg << "load_csv: label value " << v << " at row " << line_no
              << " is outside {-1,+1} and {0,1} (" << path << ")";
          throw std::runtime_error(msg.str());
        }
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  d.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    d.labels[static_cast<Eigen::Index>(i)] = labels[i];
  }
  d.feature_names = std::move(names);
  d.id = path;
  return d;
}

/// Column means and population standard deviations of the given data.
/// Constant columns get their scale floored at 1e-12 so they map to zero.
inline Standardizer fit_standardizer(const Dataset& d) {
  const Eigen::Index m = d.row_count();
  Standardizer s;
  s.mean = d.features.colwise().mean();
  Matrix centered = d.features.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(m)).sqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) s.scale[j] = std::max(s.scale[j], 1e-12);
  return s;
}

inline Dataset apply_standardizer(const Standardizer& s, const Dataset& d) {
  if (s.mean.size() != d.col_count()) {
    std::ostringstream msg;
    msg << "apply_standardizer: standardizer has " << s.mean.size() << " columns, dataset has "
        << d.col_count();
    throw std::invalid_argument(msg.str());
  }
  Dataset out = d;
  out.features = (d.features.rowwise() - s.mean.transpose()).array().rowwise() /
                 s.scale.transpose().array();
  return out;
}

inline Vector standardize_vector(const Standardizer& s, const Vector& x) {
  if (s.mean.size() != x.size()) {
    std::ostringstream msg;
    msg << "standardize_vector: standardizer has " << s.mean.size() << " columns, input has "
        << x.size();
    throw std::invalid_argument(msg.str());
  }
  return (x - s.mean).cwiseQuotient(s.scale);
}

inline Standardizer identity_standardizer(Eigen::Index n) {
  Standardizer s;
  s.mean = Vector::Zero(n);
  s.scale = Vector::Ones(n);
  return s;
}

inline Dataset subset(const Dataset& d, const std::vector<int>& idx) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), d.col_count());
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = d.features.row(idx[r]);
    out.labels[static_cast<Eigen::Index>(r)] = d.labels[idx[r]];
  }
  out.feature_names = d.feature_names;
  out.id = d.id;
  return out;
}

/// Deterministic train/test index splits. k-fold parts are disjoint and
/// cover every row exactly once; holdout uses round(ratio*m) training rows.
inline SplitSet make_splits(const Dataset& d, const SplitPlan& plan) {
  const int m = static_cast<int>(d.row_count());
  SplitSet out;

  std::vector<int> idx(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  detail::seeded_shuffle(idx, plan.seed);

  if (plan.kind == SplitPlan::Kind::holdout) {
    if (!(plan.ratio > 0.0 && plan.ratio < 1.0))
      throw std::invalid_argument("make_splits: holdout ratio must be in (0,1)");
    int train_count = static_cast<int>(std::llround(plan.ratio * m));
    train_count = std::clamp(train_count, 1, m - 1);
    IndexSplit part;
    part.train.assign(idx.begin(), idx.begin() + train_count);
    part.test.assign(idx.begin() + train_count, idx.end());
    out.parts.push_back(std::move(part));
    return out;
  }

  if (plan.folds < 2 || plan.folds > m)
    throw std::invalid_argument("make_splits: fold count must be in [2, m]");

  int pos = 0, neg = 0;
  for (int i = 0; i < m; ++i) (d.labels[i] > 0 ? pos : neg)++;
  if (plan.folds > std::min(pos, neg)) {
    std::ostringstream msg;
    msg << "fold count " << plan.folds << " exceeds smallest class count " << std::min(pos, neg)
        << "; some folds will miss a class";
    out.warnings.push_back(msg.str());
  }

  for (int f = 0; f < plan.folds; ++f) {
    // contiguous chunks of the shuffled order
    int lo = static_cast<int>(static_cast<long long>(f) * m / plan.folds);
    int hi = static_cast<int>(static_cast<long long>(f + 1) * m / plan.folds);
    IndexSplit part;
    part.test.assign(idx.begin() + lo, idx.begin() + hi);
    part.train.reserve(static_cast<std::size_t>(m - (hi - lo)));
    part.train.insert(part.train.end(), idx.begin(), idx.begin() + lo);
    part.train.insert(part.train.end(), idx.begin() + hi, idx.end());
    out.parts.push_back(std::move(part));
  }
  return out;
}

}  // namespace small
