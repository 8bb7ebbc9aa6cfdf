#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "small/saddle.hpp"
#include "support/test_support.hpp"

using small::aggregate_M;
using small::big_phi;
using small::GradientMode;
using small::grad_duals;
using small::grad_eps;
using small::Matrix;
using small::phi_value;
using small::recover_W;
using small::SaddleProblem;
using small::Vector;

namespace {

struct Instance {
  small::Dataset data;
  SaddleProblem prob;
};

Instance make_instance(int m, int n, int p, std::uint64_t seed,
                       GradientMode mode = GradientMode::consistent, double lambda = 0.1) {
  Instance inst;
  inst.data = testsupport::desk_instance(m, n, seed);
  std::mt19937_64 rng(seed + 1);
  inst.prob.assignment = testsupport::random_assignment(inst.data, p, rng);
  inst.prob.p = p;
  inst.prob.k = std::max(1, n / 2);
  inst.prob.lambda = lambda;
  inst.prob.mode = mode;
  return inst;
}

Matrix random_interior_mask(int p, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.1, 0.9);
  Matrix eps(p, n);
  for (int j = 0; j < p; ++j)
    for (int l = 0; l < n; ++l) eps(j, l) = unif(rng);
  return eps;
}

// single-example instance: y = -1, x = e_1
Instance one_negative_example() {
  Instance inst;
  inst.data.features = Matrix::Zero(1, 3);
  inst.data.features(0, 0) = 1.0;
  inst.data.labels = -Vector::Ones(1);
  inst.data.feature_names = {"a", "b", "c"};
  inst.prob.p = 2;
  inst.prob.k = 3;
  inst.prob.lambda = 1.0;
  return inst;
}

}  // namespace

TEST_CASE("aggregate_M basics") {
  Instance inst = make_instance(12, 4, 2, 31);
  inst.prob.data = &inst.data;

  CHECK(aggregate_M(Matrix::Zero(2, 12), inst.data).isZero(0.0));

  Instance one = one_negative_example();
  Matrix S = Matrix::Zero(2, 1);
  S(0, 0) = -1.0;  // s = -e_1
  Matrix M = aggregate_M(S, one.data);
  // hand expansion: M = y s x^T = (+1) e_1 e_1^T
  Matrix expected = Matrix::Zero(2, 3);
  expected(0, 0) = 1.0;
  CHECK((M - expected).lpNorm<Eigen::Infinity>() == 0.0);

  // independent loop oracle on a random instance
  std::mt19937_64 rng(32);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix Sr(2, 12), Sr2(2, 12);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 12; ++i) { Sr(j, i) = gauss(rng); Sr2(j, i) = gauss(rng); }
  Matrix Mr = aggregate_M(Sr, inst.data);
  Matrix loops = Matrix::Zero(2, 4);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 4; ++l)
        loops(j, l) += inst.data.labels[i] * Sr(j, i) * inst.data.features(i, l);
  CHECK((Mr - loops).lpNorm<Eigen::Infinity>() < 1e-12);

  // bilinearity
  Matrix sum_then = aggregate_M(Sr + Sr2, inst.data);
  Matrix then_sum = aggregate_M(Sr, inst.data) + aggregate_M(Sr2, inst.data);
  CHECK((sum_then - then_sum).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("big_phi vanishes at the origin and expands correctly") {
  Instance inst = one_negative_example();
  inst.prob.data = &inst.data;
  CHECK(big_phi(Matrix::Zero(2, 3), Matrix::Ones(2, 3), Matrix::Zero(2, 1), inst.prob) == 0.0);

  Matrix S = Matrix::Zero(2, 1);
  S(0, 0) = -1.0;
  Matrix eps = Matrix::Ones(2, 3);
  std::mt19937_64 rng(33);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix W(2, 3);
  for (int j = 0; j < 2; ++j)
    for (int l = 0; l < 3; ++l) W(j, l) = gauss(rng);

  // independent expansion: (1/m) <M . eps, W> - (1/m) u*(s) + (lambda/2)||W||^2
  Matrix M = aggregate_M(S, inst.data);
  const double expected = M.cwiseProduct(eps).cwiseProduct(W).sum() - small::u_conjugate(S.col(0)) +
                          0.5 * inst.prob.lambda * W.squaredNorm();
  CHECK_THAT(big_phi(W, eps, S, inst.prob), Catch::Matchers::WithinAbs(expected, 1e-12));
}

TEST_CASE("big_phi is convex in W") {
  Instance inst = make_instance(15, 4, 2, 34);
  inst.prob.data = &inst.data;
  std::mt19937_64 rng(35);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix S = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
  Matrix eps = random_interior_mask(2, 4, rng);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix A(2, 4), B(2, 4);
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 4; ++l) { A(j, l) = gauss(rng); B(j, l) = gauss(rng); }
    const double mid = big_phi(0.5 * (A + B), eps, S, inst.prob);
    CHECK(mid <= 0.5 * (big_phi(A, eps, S, inst.prob) + big_phi(B, eps, S, inst.prob)) + 1e-10);
  }
}

TEST_CASE("recover_W closed form and stationarity") {
  Instance one = one_negative_example();
  one.prob.data = &one.data;
  CHECK(recover_W(Matrix::Ones(2, 3), Matrix::Zero(2, 1), one.prob).isZero(0.0));

  Matrix S = Matrix::Zero(2, 1);
  S(0, 0) = -1.0;
  Matrix W = recover_W(Matrix::Ones(2, 3), S, one.prob);
  CHECK_THAT(W(0, 0), Catch::Matchers::WithinAbs(-1.0, 1e-14));
  CHECK(std::abs(W(0, 1)) + std::abs(W(0, 2)) + W.row(1).cwiseAbs().sum() == 0.0);

  // doubling lambda halves the output
  SaddleProblem prob2 = one.prob;
  prob2.lambda = 2.0;
  Matrix W2 = recover_W(Matrix::Ones(2, 3), S, prob2);
  CHECK((W2 - 0.5 * W).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("recover_W is the stationary point of big_phi in W") {
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> lam(0.05, 2.0);
  for (int rep = 0; rep < 25; ++rep) {
    Instance inst = make_instance(10, 3, 2, 37 + rep);
    inst.prob.data = &inst.data;
    inst.prob.lambda = lam(rng);
    Matrix S = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
    Matrix eps = random_interior_mask(2, 3, rng);
    Matrix W = recover_W(eps, S, inst.prob);

    const double h = 1e-6;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      for (int l = 0; l < 3; ++l) {
        Matrix Wp = W, Wm = W;
        Wp(j, l) += h;
        Wm(j, l) -= h;
        const double fd =
            (big_phi(Wp, eps, S, inst.prob) - big_phi(Wm, eps, S, inst.prob)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd));
      }
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("phi_value vanishes at zero duals in both modes") {
  for (GradientMode mode : {GradientMode::consistent, GradientMode::paper_literal}) {
    Instance inst = make_instance(11, 3, 2, 38, mode);
    inst.prob.data = &inst.data;
    std::mt19937_64 rng(39);
    Matrix eps = random_interior_mask(2, 3, rng);
    CHECK(phi_value(eps, Matrix::Zero(2, 11), inst.prob) == 0.0);
  }
}

TEST_CASE("phi_value equals big_phi at recover_W on binary masks") {
  std::mt19937_64 rng(40);
  for (int rep = 0; rep < 50; ++rep) {
    Instance inst = make_instance(9, 4, 2, 41 + rep);
    inst.prob.data = &inst.data;
    Matrix S = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
    Matrix eps(2, 4);
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 4; ++l) eps(j, l) = (rng() % 2) ? 1.0 : 0.0;
    const double reduced = phi_value(eps, S, inst.prob);
    const double full = big_phi(recover_W(eps, S, inst.prob), eps, S, inst.prob);
    CHECK_THAT(reduced, Catch::Matchers::WithinAbs(full, 1e-10));
  }
}

TEST_CASE("phi_value is linear in the mask") {
  Instance inst = make_instance(13, 5, 2, 42);
  inst.prob.data = &inst.data;
  std::mt19937_64 rng(43);
  Matrix S = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix ea = random_interior_mask(2, 5, rng);
    Matrix eb = random_interior_mask(2, 5, rng);
    const double lhs = phi_value(ea, S, inst.prob) + phi_value(eb, S, inst.prob);
    const double rhs = phi_value(ea + eb, S, inst.prob) + phi_value(Matrix::Zero(2, 5), S, inst.prob);
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-9));
  }
}

TEST_CASE("gradients vanish at zero duals and are nonpositive in the mask") {
  for (GradientMode mode : {GradientMode::consistent, GradientMode::paper_literal}) {
    Instance inst = make_instance(10, 4, 2, 44, mode);
    inst.prob.data = &inst.data;
    std::mt19937_64 rng(45);
    Matrix eps = random_interior_mask(2, 4, rng);

    CHECK(grad_eps(eps, Matrix::Zero(2, 10), inst.prob).isZero(0.0));
    if (mode == GradientMode::paper_literal)
      CHECK(grad_duals(eps, Matrix::Zero(2, 10), inst.prob).isZero(0.0));

    Matrix S = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
    CHECK(grad_eps(eps, S, inst.prob).maxCoeff() <= 0.0);
  }
}

TEST_CASE("paper-literal gradient on the single-example instance") {
  Instance one = one_negative_example();
  one.prob.data = &one.data;
  one.prob.mode = GradientMode::paper_literal;
  Matrix S = Matrix::Zero(2, 1);
  S(0, 0) = -1.0;
  Matrix G = grad_eps(Matrix::Ones(2, 3), S, one.prob);
  // M = e_1 e_1^T, so the only non-zero of -(1/(m lambda)) M.M is -1 at (1,1)
  CHECK_THAT(G(0, 0), Catch::Matchers::WithinAbs(-1.0, 1e-14));
  G(0, 0) = 0.0;
  CHECK(G.isZero(0.0));

  // and the linear phi reproduces it through finite differences exactly
  Matrix eps = Matrix::Ones(2, 3) * 0.5;
  Matrix Gl = grad_eps(eps, S, one.prob);
  const double h = 1e-4;
  for (int j = 0; j < 2; ++j) {
    for (int l = 0; l < 3; ++l) {
      Matrix ep = eps, em = eps;
      ep(j, l) += h;
      em(j, l) -= h;
      const double fd = (phi_value(ep, S, one.prob) - phi_value(em, S, one.prob)) / (2.0 * h);
      CHECK_THAT(Gl(j, l), Catch::Matchers::WithinAbs(fd, 1e-8));
    }
  }
}

TEST_CASE("consistent-mode gradients match central finite differences") {
  std::mt19937_64 rng(46);
  for (int rep = 0; rep < 20; ++rep) {
    Instance inst = make_instance(8, 3, 2, 47 + rep);
    inst.prob.data = &inst.data;
    Matrix S = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
    Matrix eps = random_interior_mask(2, 3, rng);

    const double h = 1e-6;
    Matrix Ge = grad_eps(eps, S, inst.prob);
    double num = 0.0, den = 0.0;
    for (int j = 0; j < 2; ++j) {
      for (int l = 0; l < 3; ++l) {
        Matrix ep = eps, em = eps;
        ep(j, l) += h;
        em(j, l) -= h;
        const double fd = (phi_value(ep, S, inst.prob) - phi_value(em, S, inst.prob)) / (2.0 * h);
        num = std::max(num, std::abs(fd - Ge(j, l)));
        den = std::max(den, std::abs(Ge(j, l)));
      }
    }
    CHECK(num <= 1e-4 * std::max(den, 1e-8));

    Matrix Gs = grad_duals(eps, S, inst.prob);
    num = den = 0.0;
    for (int i = 0; i < 8; ++i) {
      const bool positive = inst.data.labels[i] > 0;
      for (int j = 0; j < 2; ++j) {
        if (positive && j != inst.prob.assignment.at(i)) continue;  // pinned coordinate
        Matrix Sp = S, Sm = S;
        Sp(j, i) += h;
        Sm(j, i) -= h;
        const double fd = (phi_value(eps, Sp, inst.prob) - phi_value(eps, Sm, inst.prob)) / (2.0 * h);
        num = std::max(num, std::abs(fd - Gs(j, i)));
        den = std::max(den, std::abs(Gs(j, i)));
      }
    }
    CHECK(num <= 1e-4 * std::max(den, 1e-8));
  }
}

TEST_CASE("phi is concave in the duals") {
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Instance inst = make_instance(12, 4, 2, 49);
  inst.prob.data = &inst.data;
  for (int rep = 0; rep < 40; ++rep) {
    Matrix eps = random_interior_mask(2, 4, rng);
    Matrix Sa = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
    Matrix Sb = testsupport::random_interior_duals(inst.data, inst.prob.assignment, 2, rng);
    const double theta = unif(rng);
    const double mixed = phi_value(eps, theta * Sa + (1.0 - theta) * Sb, inst.prob);
    const double bound =
        theta * phi_value(eps, Sa, inst.prob) + (1.0 - theta) * phi_value(eps, Sb, inst.prob);
    CHECK(mixed >= bound - 1e-9);
  }
}

TEST_CASE("dual maximization recovers the primal losses on a grid") {
  // max over feasible s of y s^T (W.eps) x - u*(s) should reach the log-loss
  // for positives and the softmax envelope for negatives
  std::mt19937_64 rng(50);
  std::normal_distribution<double> gauss(0.0, 0.5);
  std::uniform_real_distribution<double> unif(0.1, 0.9);

  for (int p : {1, 2, 3}) {
    for (int rep = 0; rep < 3; ++rep) {
      const int n = 3;
      Matrix W(p, n);
      Matrix eps(p, n);
      Vector x(n);
      for (int j = 0; j < p; ++j)
        for (int l = 0; l < n; ++l) { W(j, l) = gauss(rng); eps(j, l) = unif(rng); }
      for (int l = 0; l < n; ++l) x[l] = gauss(rng);
      Vector scores = W.cwiseProduct(eps) * x;

      // positive example, dedicated prototype 0
      double best_pos = -1e100;
      for (int step = 0; step <= 2000; ++step) {
        Vector s = Vector::Zero(p);
        s[0] = -static_cast<double>(step) / 2000.0;
        best_pos = std::max(best_pos, s.dot(scores) - small::u_conjugate(s));
      }
      CHECK_THAT(best_pos, Catch::Matchers::WithinAbs(small::log_loss(scores[0]), 1e-3));

      // negative example: grid over the simplex-like dual set
      double best_neg = -1e100;
      const int steps = p == 3 ? 100 : 200;
      std::vector<int> counter(static_cast<std::size_t>(p), 0);
      while (true) {
        double total = 0.0;
        for (int j = 0; j < p; ++j) total += counter[static_cast<std::size_t>(j)];
        if (total <= steps) {
          Vector s(p);
          for (int j = 0; j < p; ++j) s[j] = -static_cast<double>(counter[static_cast<std::size_t>(j)]) / steps;
          best_neg = std::max(best_neg, -s.dot(scores) - small::u_conjugate(s));
        }
        int c = 0;
        while (c < p && ++counter[static_cast<std::size_t>(c)] > steps) counter[static_cast<std::size_t>(c++)] = 0;
        if (c == p) break;
      }
      CHECK_THAT(best_neg, Catch::Matchers::WithinAbs(small::softmax_u(-scores), 1e-3));
    }
  }
}
