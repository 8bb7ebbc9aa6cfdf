#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "small/dataset.hpp"
#include "small/losses.hpp"

namespace small {

inline constexpr int kModelFormatVersion = 1;

struct ModelMetadata {
  std::uint64_t seed = 0;
  int iterations = 0;
  double objective = 0.0;
  std::string gradient_mode = "consistent";
  bool refit = false;
};

/// A trained sparse multiprototype predictor: f(x) = sign(max_j w_j . z)
/// where z is the stored standardizer applied to the raw input. The
/// standardizer travels with the model so a saved file is deployable
/// without the training statistics.
struct TrainedModel {
  Matrix W;  // p x n
  Standardizer standardizer;
  std::vector<std::string> feature_names;
  int k = 0;
  double lambda = 0.0;
  ModelMetadata metadata;

  Eigen::Index prototype_count() const { return W.rows(); }
  Eigen::Index input_dim() const { return W.cols(); }
};

struct DecisionValues {
  double max_score = 0.0;
  int winner = 0;  // lowest index on ties
  Vector scores;
};

/// Scores a raw input: standardizes with the stored parameters, then takes
/// all p inner products. Winner is the argmax with lowest-index tie-break.
inline DecisionValues decision_values(const TrainedModel& model, const Vector& x_raw) {
  if (x_raw.size() != model.input_dim()) {
    std::ostringstream msg;
    msg << "decision_values: input has " << x_raw.size() << " features, model expects "
        << model.input_dim();
    throw std::invalid_argument(msg.str());
  }
  DecisionValues out;
  out.scores = model.W * standardize_vector(model.standardizer, x_raw);
  out.winner = 0;
  out.max_score = out.scores[0];
  for (Eigen::Index j = 1; j < out.scores.size(); ++j)
    if (out.scores[j] > out.max_score) { out.max_score = out.scores[j]; out.winner = static_cast<int>(j); }
  return out;
}

/// +1 iff the max score is strictly positive; ties at zero go negative.
inline int predict(const TrainedModel& model, const Vector& x_raw) {
  return decision_values(model, x_raw).max_score > 0.0 ? 1 : -1;
}

inline double accuracy(const TrainedModel& model, const Dataset& d) {
  int correct = 0;
  for (int i = 0; i < d.row_count(); ++i)
    if (predict(model, d.features.row(i).transpose()) == static_cast<int>(d.labels[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.row_count());
}

struct SparsityReport {
  std::vector<int> row_support;     // non-zero count per prototype
  int total_with_multiplicity = 0;  // features counted once per prototype they appear in
  int distinct = 0;
};

inline SparsityReport sparsity_report(const TrainedModel& model) {
  SparsityReport rep;
  std::set<Eigen::Index> seen;
  for (Eigen::Index j = 0; j < model.W.rows(); ++j) {
    int nnz = 0;
    for (Eigen::Index l = 0; l < model.W.cols(); ++l) {
      if (model.W(j, l) != 0.0) { ++nnz; seen.insert(l); }
    }
    rep.row_support.push_back(nnz);
    rep.total_with_multiplicity += nnz;
  }
  rep.distinct = static_cast<int>(seen.size());
  return rep;
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* name,
                                           const std::string& path) {
  auto it = j.find(name);
  if (it == j.end())
    throw std::runtime_error("model file " + path + ": missing field '" + name + "'");
  return *it;
}

inline Vector json_to_vector(const nlohmann::json& arr, const char* name, const std::string& path) {
  if (!arr.is_array())
    throw std::runtime_error("model file " + path + ": field '" + name + "' must be an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace detail

/// Serializes the model as a single self-describing JSON document. Writes
/// through a temporary file so a failed save never leaves a partial model.
inline void save_model(const TrainedModel& model, const std::string& path) {
  nlohmann::json j;
  j["version"] = kModelFormatVersion;
  j["p"] = static_cast<int>(model.W.rows());
  j["n"] = static_cast<int>(model.W.cols());
  j["k"] = model.k;
  j["lambda"] = model.lambda;
  j["feature_names"] = model.feature_names;
  j["mean"] = std::vector<double>(model.standardizer.mean.data(),
                                  model.standardizer.mean.data() + model.standardizer.mean.size());
  j["scale"] = std::vector<double>(model.standardizer.scale.data(),
                                   model.standardizer.scale.data() + model.standardizer.scale.size());
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < model.W.rows(); ++r) {
    std::vector<double> row(model.W.cols());
    for (Eigen::Index c = 0; c < model.W.cols(); ++c) row[static_cast<std::size_t>(c)] = model.W(r, c);
    rows.push_back(row);
  }
  j["prototypes"] = rows;
  j["metadata"] = {{"seed", model.metadata.seed},
                   {"iterations", model.metadata.iterations},
                   {"objective", model.metadata.objective},
                   {"gradient_mode", model.metadata.gradient_mode},
                   {"refit", model.metadata.refit}};

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("save_model: cannot open " + tmp + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_model: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("save_model: cannot move temporary file onto " + path);
  }
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_model: corrupted model file " + path + ": " + e.what());
  }

  const int version = detail::require_field(j, "version", path).get<int>();
  if (version != kModelFormatVersion) {
    std::ostringstream msg;
    msg << "load_model: unsupported model format version " << version << " (expected "
        << kModelFormatVersion << ") in " << path;
    throw std::runtime_error(msg.str());
  }

  TrainedModel m;
  const int p = detail::require_field(j, "p", path).get<int>();
  const int n = detail::require_field(j, "n", path).get<int>();
  m.k = detail::require_field(j, "k", path).get<int>();
  m.lambda = detail::require_field(j, "lambda", path).get<double>();
  m.feature_names = detail::require_field(j, "feature_names", path).get<std::vector<std::string>>();
  m.standardizer.mean = detail::json_to_vector(detail::require_field(j, "mean", path), "mean", path);
  m.standardizer.scale = detail::json_to_vector(detail::require_field(j, "scale", path), "scale", path);

  const auto& rows = detail::require_field(j, "prototypes", path);
  if (!rows.is_array() || static_cast<int>(rows.size()) != p)
    throw std::runtime_error("model file " + path + ": field 'prototypes' must hold p rows");
  m.W.resize(p, n);
  for (int r = 0; r < p; ++r) {
    if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != n)
      throw std::runtime_error("model file " + path + ": prototype row has wrong length");
    for (int c = 0; c < n; ++c)
      m.W(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  if (static_cast<int>(m.feature_names.size()) != n || m.standardizer.mean.size() != n ||
      m.standardizer.scale.size() != n)
    throw std::runtime_error("model file " + path + ": inconsistent dimensions");

  const auto& meta = detail::require_field(j, "metadata", path);
  m.metadata.seed = detail::require_field(meta, "seed", path).get<std::uint64_t>();
  m.metadata.iterations = detail::require_field(meta, "iterations", path).get<int>();
  m.metadata.objective = detail::require_field(meta, "objective", path).get<double>();
  m.metadata.gradient_mode = detail::require_field(meta, "gradient_mode", path).get<std::string>();
  m.metadata.refit = detail::require_field(meta, "refit", path).get<bool>();
  return m;
}

}  // namespace small
