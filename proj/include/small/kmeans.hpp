#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "small/dataset.hpp"

namespace small {

struct ClusterResult {
  Matrix centers;           // p x n
  std::vector<int> labels;  // nearest-center index per input row
};

/// Lloyd's iterations over the rows of `points` with seeded farthest-point
/// initialization. Ties in nearest-center lookups break toward the lower
/// index; empty clusters keep their previous center. Deterministic for a
/// fixed seed.
inline ClusterResult cluster_rows(const Matrix& points, int p, std::uint64_t seed,
                                  int max_iters = 50) {
  const int m = static_cast<int>(points.rows());
  if (m < 1) throw std::invalid_argument("cluster_rows: no points");
  if (p < 1 || p > m) throw std::invalid_argument("cluster_rows: cluster count outside [1, m]");

  std::mt19937_64 rng(seed);
  std::vector<int> chosen;
  chosen.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(m)));

  Vector nearest = Vector::Constant(m, std::numeric_limits<double>::infinity());
  while (static_cast<int>(chosen.size()) < p) {
    const auto& last = points.row(chosen.back());
    for (int i = 0; i < m; ++i)
      nearest[i] = std::min(nearest[i], (points.row(i) - last).squaredNorm());
    int next = 0;
    double best = -1.0;
    for (int i = 0; i < m; ++i)
      if (nearest[i] > best) { best = nearest[i]; next = i; }
    chosen.push_back(next);
  }

  Matrix centers(p, points.cols());
  for (int c = 0; c < p; ++c) centers.row(c) = points.row(chosen[static_cast<std::size_t>(c)]);

  std::vector<int> labels(static_cast<std::size_t>(m), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < m; ++i) {
      int arg = 0;
      double best = (points.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < p; ++c) {
        double dist = (points.row(i) - centers.row(c)).squaredNorm();
        if (dist < best) { best = dist; arg = c; }
      }
      if (labels[static_cast<std::size_t>(i)] != arg) {
        labels[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    for (int c = 0; c < p; ++c) {
      Vector mean = Vector::Zero(points.cols());
      int count = 0;
      for (int i = 0; i < m; ++i)
        if (labels[static_cast<std::size_t>(i)] == c) { mean += points.row(i).transpose(); ++count; }
      if (count > 0) centers.row(c) = (mean / count).transpose();
    }
  }
  return {centers, labels};
}

}  // namespace small
