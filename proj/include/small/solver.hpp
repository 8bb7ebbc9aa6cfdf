#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "small/dataset.hpp"
#include "small/kmeans.hpp"
#include "small/losses.hpp"
#include "small/model.hpp"
#include "small/projections.hpp"
#include "small/saddle.hpp"

namespace small {

struct SolverConfig {
  double lambda = 0.1;
  int k = 3;
  int p = 2;
  double alpha = 0.01;   // mask step size
  double beta = 0.001;   // dual step size
  int iters = 2000;      // T; the loop runs t = 0..T and averages t = 1..T
  double tol = 1e-10;    // projection tolerance
  std::uint64_t seed = 0;
  GradientMode mode = GradientMode::consistent;
  bool refit = false;
  int trace_every = 0;   // checkpoint cadence; 0 disables tracing

  void validate(Eigen::Index n) const {
    if (!(lambda > 0.0)) throw std::invalid_argument("SolverConfig: lambda must be positive");
    if (!(alpha > 0.0) || !(beta > 0.0))
      throw std::invalid_argument("SolverConfig: step sizes must be positive");
    if (iters < 0) throw std::invalid_argument("SolverConfig: iteration count must be >= 0");
    if (k < 1 || k > n) throw std::invalid_argument("SolverConfig: budget k outside [1, n]");
    if (p < 1) throw std::invalid_argument("SolverConfig: prototype count must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  }
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  double gap = 0.0;
  double eps_step_norm = 0.0;
  double dual_step_norm = 0.0;
};

struct SolverTrace {
  std::vector<TraceRow> rows;
  std::vector<std::string> warnings;
};

inline std::string trace_to_tsv(const SolverTrace& trace) {
  std::ostringstream out;
  out << "iteration\tobjective\tgap\teps_step_norm\tdual_step_norm\n";
  out.precision(12);
  for (const auto& r : trace.rows)
    out << r.iteration << '\t' << r.objective << '\t' << r.gap << '\t' << r.eps_step_norm << '\t'
        << r.dual_step_norm << '\n';
  return out.str();
}

struct InitState {
  Matrix eps;  // p x n, uniform min(1, k/n)
  Matrix S;    // p x m, feasible by construction
  PrototypeAssignment assignment;
  int effective_p = 0;  // p clipped to the positive-example count
  std::vector<std::string> warnings;
};

/// Clusters the positive examples into p groups (dedicating one prototype to
/// each group), and produces feasible starting points for the mask and the
/// duals: eps0 uniform at min(1, k/n), positive duals at -1/2 on their own
/// prototype, negative duals uniform at -1/(2p).
inline InitState init_state(const Dataset& d, const SolverConfig& cfg) {
  cfg.validate(d.col_count());
  const std::vector<int> pos = d.positive_indices();
  if (pos.empty()) throw std::invalid_argument("init_state: no positive examples");
  if (d.negative_indices().empty()) throw std::invalid_argument("init_state: no negative examples");

  InitState st;
  st.effective_p = cfg.p;
  if (st.effective_p > static_cast<int>(pos.size())) {
    st.effective_p = static_cast<int>(pos.size());
    std::ostringstream msg;
    msg << "prototype count " << cfg.p << " exceeds positive-example count " << pos.size()
        << "; reduced to " << st.effective_p;
    st.warnings.push_back(msg.str());
  }
  const int p = st.effective_p;
  const int m = static_cast<int>(d.row_count());
  const int n = static_cast<int>(d.col_count());

  Matrix pos_rows(static_cast<Eigen::Index>(pos.size()), n);
  for (std::size_t r = 0; r < pos.size(); ++r) pos_rows.row(static_cast<Eigen::Index>(r)) = d.features.row(pos[r]);
  ClusterResult clusters = cluster_rows(pos_rows, p, cfg.seed);
  for (std::size_t r = 0; r < pos.size(); ++r)
    st.assignment.j_of[pos[r]] = clusters.labels[r];

  st.eps = Matrix::Constant(p, n, std::min(1.0, static_cast<double>(cfg.k) / n));
  st.S = Matrix::Zero(p, m);
  for (int i = 0; i < m; ++i) {
    if (d.labels[i] > 0)
      st.S(st.assignment.at(i), i) = -0.5;
    else
      st.S.col(i).setConstant(-0.5 / p);
  }
  return st;
}

/// Rounds each row to exactly min(k, n) ones at its largest entries; ties
/// break toward the lower column index.
inline Matrix round_mask(const Matrix& eps_bar, int k) {
  const Eigen::Index p = eps_bar.rows(), n = eps_bar.cols();
  const Eigen::Index keep = std::min<Eigen::Index>(k, n);
  Matrix out = Matrix::Zero(p, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return eps_bar(j, a) > eps_bar(j, b);
    });
    for (Eigen::Index r = 0; r < keep; ++r) out(j, order[static_cast<std::size_t>(r)]) = 1.0;
  }
  return out;
}

/// Closed-form minimum of phi(., S) over the mask polytope: the linear form
/// has nonpositive coefficients, so each row activates its k most negative
/// gradient entries.
inline double phi_min_over_mask(const Matrix& S, const SaddleProblem& prob) {
  const Dataset& d = prob.dataset();
  const double m = static_cast<double>(d.row_count());
  const Matrix G = grad_eps(Matrix::Zero(prob.p, d.col_count()), S, prob);  // constant in eps
  double lin_min = 0.0;
  std::vector<double> row(static_cast<std::size_t>(G.cols()));
  for (Eigen::Index j = 0; j < G.rows(); ++j) {
    for (Eigen::Index l = 0; l < G.cols(); ++l) row[static_cast<std::size_t>(l)] = G(j, l);
    std::sort(row.begin(), row.end());
    for (int r = 0; r < prob.k; ++r) lin_min += std::min(row[static_cast<std::size_t>(r)], 0.0);
  }
  const double u_term = detail::sum_u_star(S);
  return lin_min + (prob.mode == GradientMode::paper_literal ? -u_term : -u_term / m);
}

/// Duality-gap surrogate: the closed-form minimum of the linear form over
/// the mask polytope is subtracted from a 100-step projected-ascent probe
/// over the duals. The ascent follows the bilinear part of the dual gradient
/// and keeps the best value seen, so the estimate never drops below the
/// current phi and the result is nonnegative up to ascent inexactness.
inline double estimate_gap(const Matrix& eps, const Matrix& S, const SaddleProblem& prob,
                           double tol = 1e-10, int ascent_steps = 100) {
  const Dataset& d = prob.dataset();
  const double m = static_cast<double>(d.row_count());
  const double phi_min = phi_min_over_mask(S, prob);

  // ascent probe from the current duals
  const double bilinear_c = prob.mode == GradientMode::paper_literal ? 1.0 / (m * prob.lambda)
                                                                     : 1.0 / (m * m * prob.lambda);
  const double lipschitz = bilinear_c * d.features.squaredNorm();
  const double step = 1.0 / std::max(lipschitz, 1e-12);
  Matrix Sa = S;
  double best = phi_value(eps, Sa, prob);
  for (int it = 0; it < ascent_steps; ++it) {
    const Matrix B = aggregate_M(Sa, d).cwiseProduct(eps) * d.features.transpose();
    const Matrix Gs = -bilinear_c * (B.array().rowwise() * d.labels.transpose().array()).matrix();
    Sa = project_duals(Sa + step * Gs, prob, tol);
    best = std::max(best, phi_value(eps, Sa, prob));
  }
  return best - phi_min;
}

/// Raw output of the saddle solve, before packaging into a TrainedModel.
struct SolveOutput {
  Matrix eps_bar;      // averaged relaxed mask
  Matrix S_bar;        // averaged duals
  Matrix eps_rounded;  // binary mask with k ones per row
  Matrix W;            // recovered (and optionally refit) prototypes
  PrototypeAssignment assignment;
  int effective_p = 0;
  SolverTrace trace;
};

namespace detail {

inline void check_finite_state(const Matrix& eps, const Matrix& S, int t, const char* block) {
  if (!eps.allFinite() || !S.allFinite()) {
    std::ostringstream msg;
    msg << "solver: non-finite values at iteration " << t << " in " << block
        << " (step sizes too large?)";
    throw std::runtime_error(msg.str());
  }
}

/// Gradient descent on the smoothed regularized objective restricted to the
/// rounded support: 500 steps of size 1/(lambda m), stopping early once the
/// objective change falls under 1e-9.
inline Matrix refit_on_support(Matrix W, const Matrix& mask, const Dataset& d,
                               const PrototypeAssignment& a, double lambda) {
  const double m = static_cast<double>(d.row_count());
  const double step = 1.0 / (lambda * m);
  W = W.cwiseProduct(mask);
  double prev = primal_objective(W, d, a, lambda);
  for (int it = 0; it < 500; ++it) {
    Matrix G = lambda * W;
    for (int i = 0; i < d.row_count(); ++i) {
      const Vector x = d.features.row(i).transpose();
      if (d.labels[i] > 0) {
        const int j = a.at(i);
        const double z = W.row(j).dot(x);
        const double lprime = -1.0 / (1.0 + std::exp(z));  // overflows cleanly to -0
        G.row(j) += (lprime / m) * x.transpose();
      } else {
        // d/dW_j u(-W x) = -s_j(-W x) x with s the stationary dual map
        Vector t = -(W * x);
        double hi = std::max(0.0, (-t).maxCoeff());
        double denom = std::exp(-hi);
        Vector num(t.size());
        for (Eigen::Index j = 0; j < t.size(); ++j) {
          num[j] = std::exp(-t[j] - hi);
          denom += num[j];
        }
        G += (num / (denom * m)) * x.transpose();
      }
    }
    W -= step * G.cwiseProduct(mask);
    const double cur = primal_objective(W, d, a, lambda);
    if (std::abs(prev - cur) < 1e-9) break;
    prev = cur;
  }
  return W;
}

}  // namespace detail

/// Extragradient (Mirror-Prox) loop on the relaxed saddle problem.
///
/// Each pass takes a projected gradient half-step from (eps, S), then
/// re-steps from the original point using gradients at the half-point.
/// Half-points from t = 1..T enter the step-weighted averages (for T = 0 the
/// single half-step is the average). The averaged mask is rounded to k ones
/// per row and the prototypes recovered in closed form from the averaged
/// duals; an optional refit polishes them on the rounded support.
inline SolveOutput solve_saddle(const Dataset& d, const SolverConfig& cfg) {
  cfg.validate(d.col_count());
  InitState st = init_state(d, cfg);
  const int p = st.effective_p;

  SaddleProblem prob;
  prob.data = &d;
  prob.assignment = st.assignment;
  prob.p = p;
  prob.k = cfg.k;
  prob.lambda = cfg.lambda;
  prob.mode = cfg.mode;

  Matrix eps = st.eps;
  Matrix S = st.S;
  Matrix eps_acc = Matrix::Zero(p, d.col_count());
  Matrix S_acc = Matrix::Zero(p, d.row_count());
  double weight_eps = 0.0, weight_s = 0.0;

  SolveOutput out;
  out.assignment = st.assignment;
  out.effective_p = p;
  for (const auto& w : st.warnings) out.trace.warnings.push_back(w);

  const int T = cfg.iters;
  for (int t = 0; t <= T; ++t) {
    const Matrix Ge = grad_eps(eps, S, prob);
    const Matrix Gs = grad_duals(eps, S, prob);
    const Matrix eps_hat = project_mask(eps - cfg.alpha * Ge, cfg.k, cfg.tol);
    const Matrix S_hat = project_duals(S + cfg.beta * Gs, prob, cfg.tol);

    const Matrix Ge2 = grad_eps(eps_hat, S_hat, prob);
    const Matrix Gs2 = grad_duals(eps_hat, S_hat, prob);
    const Matrix eps_next = project_mask(eps - cfg.alpha * Ge2, cfg.k, cfg.tol);
    const Matrix S_next = project_duals(S + cfg.beta * Gs2, prob, cfg.tol);

    if (t >= 1 || T == 0) {
      eps_acc += cfg.alpha * eps_hat;
      S_acc += cfg.beta * S_hat;
      weight_eps += cfg.alpha;
      weight_s += cfg.beta;
    }

    if (t % 50 == 0) {
      detail::check_finite_state(eps_next, S_next, t, "extra-gradient step");
      if (!duals_feasible(S_next, prob, 1e-9))
        throw std::runtime_error("solver: dual iterate left its feasible set (internal bug)");
    }

    if (cfg.trace_every > 0 && (t % cfg.trace_every == 0 || t == T) && weight_eps > 0.0) {
      const Matrix eps_avg = eps_acc / weight_eps;
      const Matrix S_avg = S_acc / weight_s;
      const Matrix W_now = recover_W(round_mask(eps_avg, cfg.k), S_avg, prob);
      TraceRow row;
      row.iteration = t;
      row.objective = primal_objective(W_now, d, st.assignment, cfg.lambda);
      row.gap = estimate_gap(eps_avg, S_avg, prob, cfg.tol);
      row.eps_step_norm = (eps_next - eps).norm();
      row.dual_step_norm = (S_next - S).norm();
      out.trace.rows.push_back(row);
    }

    eps = eps_next;
    S = S_next;
  }

  out.eps_bar = eps_acc / weight_eps;
  out.S_bar = S_acc / weight_s;
  out.eps_rounded = round_mask(out.eps_bar, cfg.k);
  out.W = recover_W(out.eps_rounded, out.S_bar, prob);
  if (cfg.refit)
    out.W = detail::refit_on_support(out.W, out.eps_rounded, d, st.assignment, cfg.lambda);
  return out;
}

struct TrainResult {
  TrainedModel model;
  SolverTrace trace;
};

/// Runs the saddle solver on (already standardized) data and packages the
/// result. The optional standardizer is embedded in the model so raw inputs
/// are transformed at prediction time; pass nullptr when the data needs no
/// transform.
inline TrainResult train(const Dataset& d, const SolverConfig& cfg,
                         const Standardizer* standardizer = nullptr) {
  SolveOutput sol = solve_saddle(d, cfg);
  TrainResult res;
  res.model.W = sol.W;
  res.model.standardizer = standardizer ? *standardizer : identity_standardizer(d.col_count());
  res.model.feature_names = d.feature_names;
  res.model.k = cfg.k;
  res.model.lambda = cfg.lambda;
  res.model.metadata.seed = cfg.seed;
  res.model.metadata.iterations = cfg.iters;
  res.model.metadata.objective = primal_objective(sol.W, d, sol.assignment, cfg.lambda);
  res.model.metadata.gradient_mode = to_string(cfg.mode);
  res.model.metadata.refit = cfg.refit;
  res.trace = std::move(sol.trace);
  return res;
}

}  // namespace small
