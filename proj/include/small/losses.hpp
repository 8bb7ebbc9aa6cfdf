#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "small/dataset.hpp"

namespace small {

// W stacks the prototype row vectors w_1..w_p, so W is p x n.
using PrototypeMatrix = Matrix;

/// Maps each positive example index to its dedicated prototype row.
struct PrototypeAssignment {
  std::map<int, int> j_of;

  int at(int i) const {
    auto it = j_of.find(i);
    if (it == j_of.end()) {
      std::ostringstream msg;
      msg << "PrototypeAssignment: no prototype assigned to positive example " << i;
      throw std::out_of_range(msg.str());
    }
    return it->second;
  }
};

/// log(1 + exp(-z)), stable for large |z|.
inline double log_loss(double z) {
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

/// Smooth upper envelope of max_j log_loss(t_j): log(1 + sum_j exp(-t_j)).
inline double softmax_u(const Vector& t) {
  if (t.size() == 0) throw std::invalid_argument("softmax_u: empty input");
  double hi = std::max(0.0, (-t).maxCoeff());
  double acc = std::exp(-hi);
  for (Eigen::Index j = 0; j < t.size(); ++j) acc += std::exp(-t[j] - hi);
  return hi + std::log(acc);
}

inline constexpr double kConjugateSnapTol = 1e-12;

/// Convex conjugate of softmax_u:
///   sum_j (-s_j) log(-s_j) + (1 + sum_j s_j) log(1 + sum_j s_j)
/// on {s <= 0, 1's >= -1}, +infinity outside. Violations within 1e-12 are
/// snapped onto the boundary first (projection outputs carry roundoff);
/// 0 log 0 evaluates to 0.
inline double u_conjugate(const Vector& s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double acc = 0.0;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (s[j] > kConjugateSnapTol) return inf;
    double v = -std::min(s[j], 0.0);  // snap tiny positives to the boundary
    if (v > 0.0) acc += v * std::log(v);
    sum -= v;
  }
  double total = 1.0 + sum;
  if (total < -kConjugateSnapTol) return inf;
  if (total > 0.0) acc += total * std::log(total);
  return acc;
}

/// Gradient of u_conjugate, evaluated after snapping s into the
/// delta-interior of its domain (both logs are singular on the boundary).
inline Vector u_conjugate_grad(const Vector& s, double delta = 1e-12) {
  double sum = 0.0;
  Vector g(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) sum += std::min(s[j], -delta);
  const double log_total = std::log(std::max(1.0 + sum, delta));
  for (Eigen::Index j = 0; j < s.size(); ++j)
    g[j] = log_total - std::log(-std::min(s[j], -delta));
  return g;
}

namespace detail {

inline void check_loss_dims(const PrototypeMatrix& W, const Dataset& d) {
  if (W.cols() != d.col_count()) {
    std::ostringstream msg;
    msg << "loss: prototype matrix has " << W.cols() << " columns, dataset has " << d.col_count();
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace detail

/// Non-smooth surrogate for the training error count:
/// positives contribute log_loss(w_{j(i)} . x_i), negatives max_j log_loss(-w_j . x_i).
inline double surrogate_loss(const PrototypeMatrix& W, const Dataset& d,
                             const PrototypeAssignment& a) {
  detail::check_loss_dims(W, d);
  double total = 0.0;
  for (int i = 0; i < d.row_count(); ++i) {
    Vector scores = W * d.features.row(i).transpose();
    if (d.labels[i] > 0) {
      total += log_loss(scores[a.at(i)]);
    } else {
      double worst = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < scores.size(); ++j) worst = std::max(worst, log_loss(-scores[j]));
      total += worst;
    }
  }
  return total;
}

/// Smoothed surrogate: the negative-example max is replaced by its softmax_u
/// envelope, u(-W x_i).
inline double smoothed_loss(const PrototypeMatrix& W, const Dataset& d,
                            const PrototypeAssignment& a) {
  detail::check_loss_dims(W, d);
  double total = 0.0;
  for (int i = 0; i < d.row_count(); ++i) {
    Vector scores = W * d.features.row(i).transpose();
    if (d.labels[i] > 0) {
      total += log_loss(scores[a.at(i)]);
    } else {
      total += softmax_u(-scores);
    }
  }
  return total;
}

/// (1/m) smoothed_loss + (lambda/2) ||W||_F^2 — the solver's progress metric.
inline double primal_objective(const PrototypeMatrix& W, const Dataset& d,
                               const PrototypeAssignment& a, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("primal_objective: lambda must be positive");
  const double m = static_cast<double>(d.row_count());
  return smoothed_loss(W, d, a) / m + 0.5 * lambda * W.squaredNorm();
}

}  // namespace small
