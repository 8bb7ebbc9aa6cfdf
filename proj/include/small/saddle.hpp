#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "small/dataset.hpp"
#include "small/losses.hpp"
#include "small/projections.hpp"

namespace small {

/// Which scaling of the saddle objective's gradients to use.
///
/// `paper_literal` uses the published linear form and its printed partial
/// gradients: phi = -(1/(m lambda)) <M.M, eps> - sum_i u*(s_i) with
/// grad_eps = -(1/(m lambda)) M.M and grad_s_i = -(1/(m lambda)) y_i (M.eps) x_i.
///
/// `consistent` is the exact elimination of W followed by the same
/// linearization: phi = -(1/(2 m^2 lambda)) <M.M, eps> - (1/m) sum_i u*(s_i),
/// whose dual gradient picks up both the 1/(m^2) factor and the u* term, so
/// ascent in S genuinely maximizes the concave objective.
enum class GradientMode { consistent, paper_literal };

inline std::string to_string(GradientMode m) {
  return m == GradientMode::consistent ? "consistent" : "paper";
}

inline GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "consistent") return GradientMode::consistent;
  if (s == "paper" || s == "paper_literal" || s == "paper-literal") return GradientMode::paper_literal;
  throw std::invalid_argument("unknown gradient mode: " + s);
}

/// One saddle instance: the data, the positive-example prototype assignment,
/// the regularization weight, the row budget, and the gradient scaling.
/// Dual matrices S are p x m with column i feasible for example i's set:
/// positives live on the segment {-1 <= s_{j(i)} <= 0, s_j = 0 otherwise},
/// negatives in {s <= 0, 1's >= -1}.
struct SaddleProblem {
  const Dataset* data = nullptr;
  PrototypeAssignment assignment;
  int p = 1;
  int k = 1;
  double lambda = 0.1;
  GradientMode mode = GradientMode::consistent;

  const Dataset& dataset() const {
    if (!data) throw std::logic_error("SaddleProblem: dataset pointer not set");
    return *data;
  }
};

namespace detail {

// Columns of projected duals can sit a hair outside the exact feasible set;
// pull violations within `tol` onto the boundary so u* stays finite.
inline Vector snap_dual_column(const Vector& s, double tol = 1e-9) {
  Vector v = s;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (v[j] > 0.0 && v[j] <= tol) v[j] = 0.0;
  double sum = v.sum();
  if (sum < -1.0 && sum >= -1.0 - tol) v *= -1.0 / sum;
  return v;
}

inline void check_saddle_dims(const Matrix& eps, const Matrix& S, const SaddleProblem& prob) {
  const Dataset& d = prob.dataset();
  if (eps.rows() != prob.p || eps.cols() != d.col_count() || S.rows() != prob.p ||
      S.cols() != d.row_count()) {
    std::ostringstream msg;
    msg << "saddle: dimension mismatch (eps " << eps.rows() << "x" << eps.cols() << ", S "
        << S.rows() << "x" << S.cols() << ", expected " << prob.p << "x" << d.col_count()
        << " and " << prob.p << "x" << d.row_count() << ")";
    throw std::invalid_argument(msg.str());
  }
}

inline double sum_u_star(const Matrix& S) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < S.cols(); ++i) {
    total += u_conjugate(snap_dual_column(S.col(i)));
    if (!std::isfinite(total)) return std::numeric_limits<double>::infinity();
  }
  return total;
}

}  // namespace detail

/// M = sum_i y_i s_i x_i^T, the p x n aggregate every saddle quantity reuses.
inline Matrix aggregate_M(const Matrix& S, const Dataset& d) {
  if (S.cols() != d.row_count()) {
    std::ostringstream msg;
    msg << "aggregate_M: dual matrix has " << S.cols() << " columns, dataset has "
        << d.row_count() << " rows";
    throw std::invalid_argument(msg.str());
  }
  return (S.array().rowwise() * d.labels.transpose().array()).matrix() * d.features;
}

/// Full saddle objective
///   Phi = (1/m) sum_i ( y_i s_i^T (W.eps) x_i - u*(s_i) ) + (lambda/2) ||W||_F^2.
/// Columns of S infeasible beyond the snap tolerance drive the value to
/// -infinity through u*.
inline double big_phi(const Matrix& W, const Matrix& eps, const Matrix& S,
                      const SaddleProblem& prob) {
  detail::check_saddle_dims(eps, S, prob);
  const Dataset& d = prob.dataset();
  if (W.rows() != prob.p || W.cols() != d.col_count())
    throw std::invalid_argument("big_phi: W dimensions do not match the problem");
  const double m = static_cast<double>(d.row_count());
  const double ustars = detail::sum_u_star(S);
  if (!std::isfinite(ustars)) return -std::numeric_limits<double>::infinity();
  const Matrix M = aggregate_M(S, d);
  const double bilinear = W.cwiseProduct(eps).cwiseProduct(M).sum();
  return (bilinear - ustars) / m + 0.5 * prob.lambda * W.squaredNorm();
}

/// Unique minimizer of Phi over W for fixed (eps, S):
///   W(eps, S) = -(1/(m lambda)) M . eps.
inline Matrix recover_W(const Matrix& eps, const Matrix& S, const SaddleProblem& prob) {
  detail::check_saddle_dims(eps, S, prob);
  const double m = static_cast<double>(prob.dataset().row_count());
  return (-1.0 / (m * prob.lambda)) * aggregate_M(S, prob.dataset()).cwiseProduct(eps);
}

/// Reduced objective phi(eps, S), linear in eps and concave in S.
/// See GradientMode for the two scalings.
inline double phi_value(const Matrix& eps, const Matrix& S, const SaddleProblem& prob) {
  detail::check_saddle_dims(eps, S, prob);
  const Dataset& d = prob.dataset();
  const double m = static_cast<double>(d.row_count());
  const double ustars = detail::sum_u_star(S);
  if (!std::isfinite(ustars)) return -std::numeric_limits<double>::infinity();
  const Matrix M = aggregate_M(S, d);
  const double quad = M.cwiseProduct(M).cwiseProduct(eps).sum();
  if (prob.mode == GradientMode::paper_literal)
    return -quad / (m * prob.lambda) - ustars;
  return -quad / (2.0 * m * m * prob.lambda) - ustars / m;
}

/// Partial gradient of phi in the mask; entrywise nonpositive in both modes.
inline Matrix grad_eps(const Matrix& eps, const Matrix& S, const SaddleProblem& prob) {
  detail::check_saddle_dims(eps, S, prob);
  const double m = static_cast<double>(prob.dataset().row_count());
  const Matrix M = aggregate_M(S, prob.dataset());
  const double c = prob.mode == GradientMode::paper_literal ? 1.0 / (m * prob.lambda)
                                                            : 1.0 / (2.0 * m * m * prob.lambda);
  return -c * M.cwiseProduct(M);
}

/// Partial gradients of phi in the dual columns, stacked as a p x m matrix.
inline Matrix grad_duals(const Matrix& eps, const Matrix& S, const SaddleProblem& prob) {
  detail::check_saddle_dims(eps, S, prob);
  const Dataset& d = prob.dataset();
  const double m = static_cast<double>(d.row_count());
  const Matrix M = aggregate_M(S, d);
  const Matrix B = M.cwiseProduct(eps) * d.features.transpose();  // column i = (M.eps) x_i
  if (prob.mode == GradientMode::paper_literal) {
    const double c = 1.0 / (m * prob.lambda);
    return -c * (B.array().rowwise() * d.labels.transpose().array()).matrix();
  }
  const double c = 1.0 / (m * m * prob.lambda);
  Matrix G = -c * (B.array().rowwise() * d.labels.transpose().array()).matrix();
  for (Eigen::Index i = 0; i < S.cols(); ++i)
    G.col(i) -= u_conjugate_grad(S.col(i)) / m;
  return G;
}

/// Projects every dual column onto its example's feasible set.
inline Matrix project_duals(const Matrix& S, const SaddleProblem& prob, double tol) {
  const Dataset& d = prob.dataset();
  if (S.rows() != prob.p || S.cols() != d.row_count())
    throw std::invalid_argument("project_duals: dual matrix dimensions do not match the problem");
  Matrix out(S.rows(), S.cols());
  for (Eigen::Index i = 0; i < S.cols(); ++i) {
    if (d.labels[i] > 0)
      out.col(i) = project_dual_positive(S.col(i), prob.assignment.at(static_cast<int>(i)));
    else
      out.col(i) = project_dual_negative(S.col(i), tol);
  }
  return out;
}

inline bool dual_column_feasible(const Vector& s, bool positive, int j, double tol) {
  if (positive) {
    for (Eigen::Index c = 0; c < s.size(); ++c) {
      if (c == j) {
        if (s[c] > tol || s[c] < -1.0 - tol) return false;
      } else if (std::abs(s[c]) > tol) {
        return false;
      }
    }
    return true;
  }
  if (s.maxCoeff() > tol) return false;
  return s.sum() >= -1.0 - tol;
}

inline bool duals_feasible(const Matrix& S, const SaddleProblem& prob, double tol) {
  const Dataset& d = prob.dataset();
  for (Eigen::Index i = 0; i < S.cols(); ++i) {
    const bool positive = d.labels[i] > 0;
    const int j = positive ? prob.assignment.at(static_cast<int>(i)) : -1;
    if (!dual_column_feasible(S.col(i), positive, j, tol)) return false;
  }
  return true;
}

}  // namespace small
