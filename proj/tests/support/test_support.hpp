// Shared oracles and synthetic data for the test suites. Everything here is
// deliberately independent of the library code paths it checks: projections
// are re-solved by exhaustive active-set enumeration, logistic fits by a
// damped Newton iteration, losses by direct formula evaluation.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "small/dataset.hpp"
#include "small/dnf.hpp"
#include "small/losses.hpp"

namespace testsupport {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Exact Euclidean projection onto {x in [0,1]^n : sum(x) <= k} for small n,
/// by enumerating every lower/upper/free coordinate pattern (with and
/// without the sum constraint active) and keeping the nearest feasible
/// candidate. The optimum satisfies some KKT pattern, so it is in the
/// candidate set.
inline VectorXd qp_capped_box_oracle(const VectorXd& a, int k) {
  const int n = static_cast<int>(a.size());
  double best_dist = std::numeric_limits<double>::infinity();
  VectorXd best = VectorXd::Zero(n);

  auto consider = [&](const VectorXd& x) {
    for (int i = 0; i < n; ++i)
      if (x[i] < -1e-9 || x[i] > 1.0 + 1e-9) return;
    if (x.sum() > k + 1e-9) return;
    const double dist = (x - a).squaredNorm();
    if (dist < best_dist) { best_dist = dist; best = x; }
  };

  std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 lower, 1 upper, 2 free
  long long combos = 1;
  for (int i = 0; i < n; ++i) combos *= 3;
  for (long long c = 0; c < combos; ++c) {
    long long rem = c;
    for (int i = 0; i < n; ++i) { state[static_cast<std::size_t>(i)] = static_cast<int>(rem % 3); rem /= 3; }

    VectorXd x(n);
    double free_sum = 0.0;
    int free_count = 0, upper_count = 0;
    for (int i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] == 0) x[i] = 0.0;
      else if (state[static_cast<std::size_t>(i)] == 1) { x[i] = 1.0; ++upper_count; }
      else { x[i] = a[i]; free_sum += a[i]; ++free_count; }
    }
    consider(x);  // sum constraint inactive

    if (free_count > 0) {  // sum constraint active
      const double lambda = (free_sum + upper_count - k) / free_count;
      VectorXd xa = x;
      for (int i = 0; i < n; ++i)
        if (state[static_cast<std::size_t>(i)] == 2) xa[i] = a[i] - lambda;
      consider(xa);
    }
  }
  return best;
}

/// Exact projection onto {x <= 0, sum(x) >= -1} by the same enumeration idea.
inline VectorXd qp_dual_negative_oracle(const VectorXd& s) {
  const int n = static_cast<int>(s.size());
  double best_dist = std::numeric_limits<double>::infinity();
  VectorXd best = VectorXd::Zero(n);

  auto consider = [&](const VectorXd& x) {
    for (int i = 0; i < n; ++i)
      if (x[i] > 1e-9) return;
    if (x.sum() < -1.0 - 1e-9) return;
    const double dist = (x - s).squaredNorm();
    if (dist < best_dist) { best_dist = dist; best = x; }
  };

  for (long long c = 0; c < (1LL << n); ++c) {
    VectorXd x(n);
    double free_sum = 0.0;
    int free_count = 0;
    for (int i = 0; i < n; ++i) {
      if (c & (1LL << i)) { x[i] = s[i]; free_sum += s[i]; ++free_count; }
      else x[i] = 0.0;
    }
    consider(x);  // sum constraint inactive

    if (free_count > 0) {
      const double mu = (-1.0 - free_sum) / free_count;
      VectorXd xa = x;
      for (int i = 0; i < n; ++i)
        if (c & (1LL << i)) xa[i] = s[i] + mu;
      consider(xa);
    }
  }
  return best;
}

/// Damped-Newton minimization of (1/m) sum_i log(1+exp(-y_i w.x_i))
/// + (l2/2)||w||^2, no bias. Independent of the library solvers.
inline VectorXd newton_logreg_no_bias(const MatrixXd& X, const VectorXd& y, double l2,
                                      int iters = 100) {
  const Eigen::Index m = X.rows(), n = X.cols();
  VectorXd w = VectorXd::Zero(n);
  for (int it = 0; it < iters; ++it) {
    VectorXd grad = l2 * w;
    MatrixXd H = l2 * MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double z = y[i] * X.row(i).dot(w);
      const double sig = 1.0 / (1.0 + std::exp(z));
      grad += (-y[i] * sig / m) * X.row(i).transpose();
      H += (sig * (1.0 - sig) / m) * X.row(i).transpose() * X.row(i);
    }
    if (grad.lpNorm<Eigen::Infinity>() < 1e-13) break;
    w -= H.ldlt().solve(grad);
  }
  return w;
}

/// Two Gaussian blobs per class in n dimensions, symmetric about the origin
/// so a bias-free separator exists: positives around (+-d, +d, 0...),
/// negatives around (+-d, -d, 0...).
inline small::Dataset two_blob_dataset(int per_blob, int n, std::uint64_t seed, double dist = 4.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  small::Dataset d;
  const int m = 4 * per_blob;
  d.features.resize(m, n);
  d.labels.resize(m);
  int row = 0;
  for (int blob = 0; blob < 4; ++blob) {
    const double cx = (blob % 2 == 0) ? dist : -dist;
    const double cy = (blob < 2) ? dist : -dist;
    for (int i = 0; i < per_blob; ++i, ++row) {
      for (int j = 0; j < n; ++j) d.features(row, j) = noise(rng);
      d.features(row, 0) += cx;
      d.features(row, 1) += cy;
      d.labels[row] = (blob < 2) ? 1.0 : -1.0;
    }
  }
  for (int j = 0; j < n; ++j) d.feature_names.push_back("f" + std::to_string(j));
  d.id = "two_blob";
  return d;
}

/// Fixed random desk-scale instance: Gaussian features labeled by a noisy
/// random hyperplane; guaranteed to contain both classes.
inline small::Dataset desk_instance(int m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  small::Dataset d;
  d.features.resize(m, n);
  d.labels.resize(m);
  VectorXd w(n);
  for (int j = 0; j < n; ++j) w[j] = gauss(rng);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) d.features(i, j) = gauss(rng);
    const double z = d.features.row(i).dot(w) + 0.3 * gauss(rng);
    d.labels[i] = z > 0 ? 1.0 : -1.0;
  }
  // ensure both classes
  bool pos = false, neg = false;
  for (int i = 0; i < m; ++i) (d.labels[i] > 0 ? pos : neg) = true;
  if (!pos) d.labels[0] = 1.0;
  if (!neg) d.labels[m - 1] = -1.0;
  for (int j = 0; j < n; ++j) d.feature_names.push_back("f" + std::to_string(j));
  d.id = "desk";
  return d;
}

/// Signed ±1 features labeled by a planted DNF, with label noise.
inline small::Dataset planted_dnf_dataset(const small::DnfFormula& f, int m, double noise,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  small::Dataset d;
  d.features.resize(m, f.variable_count);
  d.labels.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < f.variable_count; ++j)
      d.features(i, j) = unif(rng) < 0.5 ? 1.0 : -1.0;
    const bool sat = small::dnf_satisfied(f, d.features.row(i).transpose());
    double label = sat ? 1.0 : -1.0;
    if (unif(rng) < noise) label = -label;
    d.labels[i] = label;
  }
  for (int j = 0; j < f.variable_count; ++j) d.feature_names.push_back("v" + std::to_string(j));
  d.id = "planted_dnf";
  return d;
}

/// Random assignment of positive examples to prototypes.
inline small::PrototypeAssignment random_assignment(const small::Dataset& d, int p,
                                                    std::mt19937_64& rng) {
  small::PrototypeAssignment a;
  for (int i : d.positive_indices())
    a.j_of[i] = static_cast<int>(rng() % static_cast<std::uint64_t>(p));
  return a;
}

/// Random dual matrix, feasible and comfortably interior per column so both
/// the conjugate and its gradient stay smooth.
inline MatrixXd random_interior_duals(const small::Dataset& d,
                                      const small::PrototypeAssignment& a, int p,
                                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MatrixXd S = MatrixXd::Zero(p, d.row_count());
  for (int i = 0; i < d.row_count(); ++i) {
    if (d.labels[i] > 0) {
      S(a.at(i), i) = -(0.1 + 0.8 * unif(rng));
    } else {
      VectorXd raw(p);
      for (int j = 0; j < p; ++j) raw[j] = 0.2 + 0.8 * unif(rng);
      const double target = 0.2 + 0.6 * unif(rng);  // column sums to -target
      S.col(i) = -(raw * (target / raw.sum()));
    }
  }
  return S;
}

inline double central_diff(const std::function<double(double)>& f, double x0, double h) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

}  // namespace testsupport
