#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "small/dataset.hpp"
#include "small/losses.hpp"
#include "small/model.hpp"
#include "small/solver.hpp"

namespace small {

struct BaselineConfig {
  enum class Penalty { l1, elastic_net };
  Penalty penalty = Penalty::l1;
  double c = 0.01;          // l1 coefficient; elastic net reuses it 1:1 for the l2 part
  double inner_l2 = 0.001;  // ridge weight for the post-selection refit
  int retrain_budget = 0;   // 0 = n/2 rule
  int max_iters = 5000;
};

/// Plain linear scorer w . x + b with the same sign convention as the
/// prototype models (ties at zero predict -1).
struct LinearModel {
  Vector w;
  double bias = 0.0;
};

inline int linear_predict(const LinearModel& m, const Vector& x) {
  return m.w.dot(x) + m.bias > 0.0 ? 1 : -1;
}

inline double linear_accuracy(const LinearModel& m, const Dataset& d) {
  int correct = 0;
  for (int i = 0; i < d.row_count(); ++i)
    if (linear_predict(m, d.features.row(i).transpose()) == static_cast<int>(d.labels[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.row_count());
}

inline int support_size(const Vector& w) {
  int nnz = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] != 0.0) ++nnz;
  return nnz;
}

inline double soft_threshold(double v, double tau) {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

/// Proximal-gradient minimization of
///   (1/m) sum_i log_loss(y_i (w.x_i + b)) + c ||w||_1 [+ (c/2) ||w||_2^2]
/// with an unregularized bias. Stops when the objective change drops under
/// 1e-9 or after max_iters; a run of 100 consecutive objective increases
/// aborts as divergence.
inline LinearModel train_l1_logreg(const Dataset& d, const BaselineConfig& cfg) {
  if (!(cfg.c > 0.0)) throw std::invalid_argument("train_l1_logreg: coefficient must be positive");
  const Eigen::Index m = d.row_count(), n = d.col_count();
  const double md = static_cast<double>(m);
  const bool en = cfg.penalty == BaselineConfig::Penalty::elastic_net;

  // smooth-part Lipschitz bound: ||[X 1]||_F^2 / (4m)
  const double L = (d.features.squaredNorm() + md) / (4.0 * md) + (en ? cfg.c : 0.0);
  const double step = 1.0 / L;

  LinearModel model;
  model.w = Vector::Zero(n);
  model.bias = 0.0;

  auto objective = [&](const Vector& w, double b) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      loss += log_loss(d.labels[i] * (d.features.row(i).dot(w) + b));
    double obj = loss / md + cfg.c * w.template lpNorm<1>();
    if (en) obj += 0.5 * cfg.c * w.squaredNorm();
    return obj;
  };

  double prev = objective(model.w, model.bias);
  int rises = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    Vector grad_w = Vector::Zero(n);
    double grad_b = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double z = d.labels[i] * (d.features.row(i).dot(model.w) + model.bias);
      const double g = -d.labels[i] / (1.0 + std::exp(z));  // d log_loss / d margin
      grad_w += g * d.features.row(i).transpose();
      grad_b += g;
    }
    grad_w /= md;
    grad_b /= md;
    if (en) grad_w += cfg.c * model.w;

    Vector w_next = model.w - step * grad_w;
    for (Eigen::Index j = 0; j < n; ++j) w_next[j] = soft_threshold(w_next[j], step * cfg.c);
    model.w = w_next;
    model.bias -= step * grad_b;

    const double cur = objective(model.w, model.bias);
    if (cur > prev) {
      if (++rises >= 100) throw std::runtime_error("train_l1_logreg: objective diverging");
    } else {
      rises = 0;
    }
    if (std::abs(prev - cur) < 1e-9) break;
    prev = cur;
  }
  return model;
}

/// Damped-Newton ridge logistic regression restricted to `support`
/// (unregularized bias). Off-support weights stay exactly zero.
inline LinearModel ridge_logreg_on_support(const Dataset& d, const std::vector<int>& support,
                                           double l2, int max_newton = 60) {
  const Eigen::Index m = d.row_count();
  const double md = static_cast<double>(m);
  const int s = static_cast<int>(support.size());

  Matrix Xs(m, s + 1);  // selected columns plus the bias column
  for (int c = 0; c < s; ++c) Xs.col(c) = d.features.col(support[static_cast<std::size_t>(c)]);
  Xs.col(s).setOnes();

  Vector theta = Vector::Zero(s + 1);
  auto objective = [&](const Vector& th) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) loss += log_loss(d.labels[i] * Xs.row(i).dot(th));
    return loss / md + 0.5 * l2 * th.head(s).squaredNorm();
  };

  double fcur = objective(theta);
  for (int it = 0; it < max_newton; ++it) {
    Vector grad = Vector::Zero(s + 1);
    Matrix H = Matrix::Zero(s + 1, s + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double z = d.labels[i] * Xs.row(i).dot(theta);
      const double sig = 1.0 / (1.0 + std::exp(z));
      grad += (-d.labels[i] * sig / md) * Xs.row(i).transpose();
      H += (sig * (1.0 - sig) / md) * Xs.row(i).transpose() * Xs.row(i);
    }
    grad.head(s) += l2 * theta.head(s);
    for (int c = 0; c < s; ++c) H(c, c) += l2;
    H.diagonal().array() += 1e-12;

    Vector dir = H.ldlt().solve(grad);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-12) break;
    double stepsize = 1.0;
    Vector cand = theta - stepsize * dir;
    double fnew = objective(cand);
    int halvings = 0;
    while (fnew > fcur && halvings < 40) {
      stepsize *= 0.5;
      cand = theta - stepsize * dir;
      fnew = objective(cand);
      ++halvings;
    }
    if (std::abs(fcur - fnew) < 1e-14 && it > 0) { theta = cand; break; }
    theta = cand;
    fcur = fnew;
  }

  LinearModel out;
  out.w = Vector::Zero(d.col_count());
  for (int c = 0; c < s; ++c) out.w[support[static_cast<std::size_t>(c)]] = theta[c];
  out.bias = theta[s];
  return out;
}

/// Sparsification protocol for the baselines: keep the `budget` coordinates
/// with the largest absolute trained weights (ties toward the lower index)
/// and refit a ridge logistic model on that support only.
inline LinearModel retrain_top_features(const Dataset& d, const LinearModel& base, int budget,
                                        double inner_l2) {
  if (budget < 1) throw std::invalid_argument("retrain_top_features: budget must be >= 1");
  if (budget > d.col_count())
    throw std::invalid_argument("retrain_top_features: budget exceeds feature count");

  std::vector<int> order(static_cast<std::size_t>(d.col_count()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(base.w[a]) > std::abs(base.w[b]);
  });
  std::vector<int> support(order.begin(), order.begin() + budget);
  std::sort(support.begin(), support.end());
  return ridge_logreg_on_support(d, support, inner_l2);
}

struct CvScore {
  double accuracy = 0.0;
  double feature_count = 0.0;  // used only for tie-breaking
};

template <typename Config>
struct CvResult {
  Config best;
  int best_index = 0;
  double best_mean_accuracy = 0.0;
  std::vector<double> mean_accuracies;   // one per grid point
  std::vector<double> mean_features;
  std::vector<std::string> warnings;
};

/// Exhaustive k-fold grid search. `evaluate(train, val, config)` returns the
/// validation accuracy plus a model-size figure; the best config maximizes
/// mean accuracy with ties broken by smaller size, then by grid order.
template <typename Config, typename Evaluate>
CvResult<Config> cross_validate(const Dataset& d, const std::vector<Config>& grid, int folds,
                                std::uint64_t seed, Evaluate&& evaluate) {
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty grid");
  SplitPlan plan;
  plan.kind = SplitPlan::Kind::kfold;
  plan.folds = folds;
  plan.seed = seed;
  SplitSet splits = make_splits(d, plan);

  CvResult<Config> res;
  res.warnings = splits.warnings;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc_sum = 0.0, feat_sum = 0.0;
    for (const IndexSplit& part : splits.parts) {
      CvScore score = evaluate(subset(d, part.train), subset(d, part.test), grid[g]);
      acc_sum += score.accuracy;
      feat_sum += score.feature_count;
    }
    res.mean_accuracies.push_back(acc_sum / static_cast<double>(splits.parts.size()));
    res.mean_features.push_back(feat_sum / static_cast<double>(splits.parts.size()));
  }

  int best = 0;
  for (int g = 1; g < static_cast<int>(grid.size()); ++g) {
    const bool better = res.mean_accuracies[g] > res.mean_accuracies[best] ||
                        (res.mean_accuracies[g] == res.mean_accuracies[best] &&
                         res.mean_features[g] < res.mean_features[best]);
    if (better) best = g;
  }
  res.best = grid[static_cast<std::size_t>(best)];
  res.best_index = best;
  res.best_mean_accuracy = res.mean_accuracies[static_cast<std::size_t>(best)];
  return res;
}

/// One line of a benchmark comparison. Normalized accuracy is
/// 100 * mean accuracy / selected feature count (with multiplicity).
struct EvalRow {
  std::string dataset;
  std::string method;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double features = 0.0;
  double normalized = 0.0;
};

inline double normalized_accuracy(double mean_acc, double features) {
  return features > 0.0 ? 100.0 * mean_acc / features : 0.0;
}

inline EvalRow summarize_runs(const std::string& dataset, const std::string& method,
                              const std::vector<double>& accs, const std::vector<double>& feats) {
  EvalRow row;
  row.dataset = dataset;
  row.method = method;
  const double k = static_cast<double>(accs.size());
  row.mean_accuracy = std::accumulate(accs.begin(), accs.end(), 0.0) / k;
  double var = 0.0;
  for (double a : accs) var += (a - row.mean_accuracy) * (a - row.mean_accuracy);
  row.std_accuracy = std::sqrt(var / k);
  row.features = std::accumulate(feats.begin(), feats.end(), 0.0) / k;
  row.normalized = normalized_accuracy(row.mean_accuracy, row.features);
  return row;
}

struct BenchConfig {
  int splits = 5;
  double ratio = 0.8;
  int folds = 5;
  std::uint64_t seed = 0;
  SolverConfig solver;  // k, p, lambda, iters, tol, mode, refit
  std::vector<double> alphas{0.1, 0.01, 0.001};
  std::vector<double> betas{0.001, 0.0001};
  std::vector<double> l1_grid{0.1, 0.01, 0.001, 0.0001};
  int retrain_budget = 0;  // 0 = n/2 rule
  double inner_l2 = 0.001;
  bool run_small = true;
  bool run_l1 = true;
  bool run_elastic_net = true;
};

namespace detail {

struct SmallGridPoint {
  double alpha = 0.0;
  double beta = 0.0;
};

inline CvScore eval_small_config(const Dataset& train, const Dataset& val, SolverConfig cfg) {
  Standardizer st = fit_standardizer(train);
  TrainResult res = small::train(apply_standardizer(st, train), cfg, &st);
  CvScore score;
  score.accuracy = accuracy(res.model, val);
  score.feature_count = sparsity_report(res.model).total_with_multiplicity;
  return score;
}

inline CvScore eval_baseline_config(const Dataset& train, const Dataset& val, BaselineConfig cfg) {
  Standardizer st = fit_standardizer(train);
  Dataset train_std = apply_standardizer(st, train);
  LinearModel base = train_l1_logreg(train_std, cfg);
  const int budget = cfg.retrain_budget > 0 ? cfg.retrain_budget
                                            : std::max<int>(1, static_cast<int>(train.col_count()) / 2);
  LinearModel refit = retrain_top_features(train_std, base, budget, cfg.inner_l2);
  CvScore score;
  score.accuracy = linear_accuracy(refit, apply_standardizer(st, val));
  score.feature_count = support_size(refit.w);
  return score;
}

}  // namespace detail

/// Split/CV/test protocol over a raw dataset: per holdout split, every method
/// grid-searches on the training part with k-fold CV, retrains its best
/// config on the whole part, and reports test accuracy and model size.
inline std::vector<EvalRow> run_bench(const Dataset& raw, const BenchConfig& bc) {
  std::vector<EvalRow> rows;
  std::vector<double> small_acc, small_feat, l1_acc, l1_feat, en_acc, en_feat;

  for (int split_idx = 0; split_idx < bc.splits; ++split_idx) {
    SplitPlan plan;
    plan.kind = SplitPlan::Kind::holdout;
    plan.ratio = bc.ratio;
    plan.seed = bc.seed + static_cast<std::uint64_t>(split_idx);
    SplitSet holdout = make_splits(raw, plan);
    const Dataset train_raw = subset(raw, holdout.parts[0].train);
    const Dataset test_raw = subset(raw, holdout.parts[0].test);

    if (bc.run_small) {
      std::vector<SolverConfig> grid;
      for (double a : bc.alphas)
        for (double b : bc.betas) {
          SolverConfig cfg = bc.solver;
          cfg.alpha = a;
          cfg.beta = b;
          cfg.trace_every = 0;
          grid.push_back(cfg);
        }
      auto cv = cross_validate(train_raw, grid, bc.folds, plan.seed,
                               [&](const Dataset& tr, const Dataset& va, const SolverConfig& cfg) {
                                 return detail::eval_small_config(tr, va, cfg);
                               });
      Standardizer st = fit_standardizer(train_raw);
      TrainResult res = train(apply_standardizer(st, train_raw), cv.best, &st);
      small_acc.push_back(accuracy(res.model, test_raw));
      small_feat.push_back(sparsity_report(res.model).total_with_multiplicity);
    }

    auto run_baseline = [&](BaselineConfig::Penalty penalty, std::vector<double>& accs,
                            std::vector<double>& feats) {
      std::vector<BaselineConfig> grid;
      for (double c : bc.l1_grid) {
        BaselineConfig cfg;
        cfg.penalty = penalty;
        cfg.c = c;
        cfg.inner_l2 = bc.inner_l2;
        cfg.retrain_budget = bc.retrain_budget;
        grid.push_back(cfg);
      }
      auto cv = cross_validate(train_raw, grid, bc.folds, plan.seed,
                               [&](const Dataset& tr, const Dataset& va, const BaselineConfig& cfg) {
                                 return detail::eval_baseline_config(tr, va, cfg);
                               });
      Standardizer st = fit_standardizer(train_raw);
      Dataset train_std = apply_standardizer(st, train_raw);
      LinearModel base = train_l1_logreg(train_std, cv.best);
      const int budget = cv.best.retrain_budget > 0
                             ? cv.best.retrain_budget
                             : std::max<int>(1, static_cast<int>(train_raw.col_count()) / 2);
      LinearModel refit = retrain_top_features(train_std, base, budget, cv.best.inner_l2);
      accs.push_back(linear_accuracy(refit, apply_standardizer(st, test_raw)));
      feats.push_back(support_size(refit.w));
    };

    if (bc.run_l1) run_baseline(BaselineConfig::Penalty::l1, l1_acc, l1_feat);
    if (bc.run_elastic_net) run_baseline(BaselineConfig::Penalty::elastic_net, en_acc, en_feat);
  }

  if (bc.run_small) rows.push_back(summarize_runs(raw.id, "small", small_acc, small_feat));
  if (bc.run_l1) rows.push_back(summarize_runs(raw.id, "l1-log", l1_acc, l1_feat));
  if (bc.run_elastic_net) rows.push_back(summarize_runs(raw.id, "en-log", en_acc, en_feat));
  return rows;
}

}  // namespace small
