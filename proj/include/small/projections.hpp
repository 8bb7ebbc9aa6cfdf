#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "small/dataset.hpp"

namespace small {

/// Loop telemetry for the bisection-based projections. `iteration_bound` is
/// ceil(log2(bracket/tol)) + 1 for the bracket the executed search used.
struct ProjectionStats {
  int iterations = 0;
  int iteration_bound = 0;
  bool widened = false;
};

namespace detail {

inline int bisection_bound(double range, double tol) {
  if (range <= tol) return 1;
  return static_cast<int>(std::ceil(std::log2(range / tol))) + 1;
}

inline Vector clip01(const Vector& v) {
  return v.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace detail

/// Euclidean projection of `a` onto {x in [0,1]^n : sum(x) <= k} by
/// bisection on the shift multiplier. If clipping `a` to the box already
/// meets the budget, that clip is returned exactly. The row-sum bracket is
/// widened when the standard one excludes the solution (possible when many
/// coordinates clip at 1).
inline Vector project_row_capped_box(const Vector& a, int k, double tol,
                                     ProjectionStats* stats = nullptr) {
  const Eigen::Index n = a.size();
  if (k < 1 || k > n) {
    std::ostringstream msg;
    msg << "project_row_capped_box: budget " << k << " outside [1, " << n << "]";
    throw std::invalid_argument(msg.str());
  }
  if (!(tol > 0.0)) throw std::invalid_argument("project_row_capped_box: tol must be positive");
  if (stats) *stats = ProjectionStats{};

  const double kd = static_cast<double>(k);
  Vector clipped = detail::clip01(a);
  if (clipped.sum() <= kd) return clipped;

  double lo = (a.sum() - kd) / static_cast<double>(n);
  double hi = a.maxCoeff() - kd / static_cast<double>(n);
  // the standard bracket assumes all coordinates stay interior; verify the
  // low end still over-fills the budget, otherwise widen
  if (detail::clip01(a.array() - lo).sum() < kd) {
    lo = a.minCoeff() - kd / static_cast<double>(n);
    hi = a.maxCoeff();
    if (stats) stats->widened = true;
  }
  if (stats) stats->iteration_bound = detail::bisection_bound(hi - lo, tol);

  Vector x;
  while (true) {
    if (stats) ++stats->iterations;
    const double lambda = 0.5 * (lo + hi);
    x = detail::clip01(a.array() - lambda);
    const double s = x.sum();
    // accept only from the feasible side so the output re-projects to itself
    if (s <= kd && kd - s < tol) return x;
    if (s > kd) lo = lambda; else hi = lambda;
    if (hi - lo < tol) return detail::clip01(a.array() - hi);  // hi side keeps sum <= k
  }
}

/// Row-wise projection of a p x n mask onto the capped box polytope.
inline Matrix project_mask(const Matrix& eps, int k, double tol) {
  Matrix out(eps.rows(), eps.cols());
  for (Eigen::Index j = 0; j < eps.rows(); ++j)
    out.row(j) = project_row_capped_box(eps.row(j).transpose(), k, tol).transpose();
  return out;
}

/// Projection onto the positive-example dual set: coordinate `j` clamped to
/// [-1,0], every other coordinate set to zero.
inline Vector project_dual_positive(const Vector& s, int j) {
  if (j < 0 || j >= s.size()) {
    std::ostringstream msg;
    msg << "project_dual_positive: prototype index " << j << " outside [0, " << s.size() << ")";
    throw std::invalid_argument(msg.str());
  }
  Vector out = Vector::Zero(s.size());
  out[j] = std::clamp(s[j], -1.0, 0.0);
  return out;
}

/// Projection onto the negative-example dual set {s <= 0, 1's >= -1}:
/// clip to the nonpositive orthant, then bisect a uniform upward shift until
/// the sum constraint is met (the mirrored form of the mask projection).
inline Vector project_dual_negative(const Vector& s, double tol,
                                    ProjectionStats* stats = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("project_dual_negative: tol must be positive");
  if (stats) *stats = ProjectionStats{};

  Vector clipped = s.cwiseMin(0.0);
  if (clipped.sum() >= -1.0) return clipped;

  double lo = 0.0;
  double hi = -s.minCoeff();  // shifts every coordinate to zero
  if (stats) stats->iteration_bound = detail::bisection_bound(hi - lo, tol);

  Vector v;
  while (true) {
    if (stats) ++stats->iterations;
    const double mu = 0.5 * (lo + hi);
    v = (s.array() + mu).min(0.0);
    const double sum = v.sum();
    // accept only from the feasible side so the output re-projects to itself
    if (sum >= -1.0 && sum + 1.0 < tol) return v;
    if (sum < -1.0) lo = mu; else hi = mu;
    if (hi - lo < tol) return (s.array() + hi).min(0.0).matrix();  // hi side keeps sum >= -1
  }
}

}  // namespace small
