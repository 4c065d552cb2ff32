#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "doctest.h"
#include "quasicontact/errors.hpp"
#include "quasicontact/mark_space.hpp"

using namespace qc;

namespace {

MarkSpace two_marks() { return MarkSpace({}, Eigen::Vector2d(0.5, 0.5)); }

Eigen::MatrixXd sym_q() {
  Eigen::MatrixXd q(2, 2);
  q << 2, 1, 1, 2;
  return q;
}

// Dominant real eigenpair from a dense solver, independent of power iteration.
std::pair<double, Eigen::VectorXd> dense_dominant(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < a.rows(); ++i)
    if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real()) best = i;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  if (v.sum() < 0) v = -v;
  return {es.eigenvalues()[best].real(), v};
}

}  // namespace

TEST_CASE("mark space construction") {
  const MarkSpace s = two_marks();
  CHECK(s.size() == 2);
  CHECK(s.labels()[1] == "s1");
  CHECK(s.total_mass() == doctest::Approx(1.0));
  CHECK_THROWS_AS(MarkSpace({}, Eigen::Vector2d(0.5, 0.0)), ValidationError);
  CHECK_THROWS_AS(MarkSpace({"a"}, Eigen::Vector2d(0.5, 0.5)), ShapeError);

  const MarkSpace g = MarkSpace::uniform_grid(4);
  CHECK(g.coordinates()[0] == doctest::Approx(0.125));
  CHECK(g.weights().sum() == doctest::Approx(1.0));
}

TEST_CASE("kernel validation") {
  Eigen::MatrixXd q = sym_q();
  q(0, 1) = 0.0;
  CHECK_THROWS_AS(MarkKernel(two_marks(), q), ValidationError);
  CHECK_THROWS_AS(MarkKernel(two_marks(), Eigen::MatrixXd::Ones(3, 3)), ShapeError);
  CHECK_THROWS_AS(MarkKernel(two_marks(), sym_q(), Eigen::Vector2d(1.0, -1.0)), ValidationError);
  CHECK(MarkKernel(two_marks(), sym_q()).homogeneous_mortality());
}

TEST_CASE("apply_kernel examples") {
  const MarkKernel one(MarkSpace::single(), Eigen::MatrixXd::Constant(1, 1, 3.5));
  CHECK(apply_kernel(one, Eigen::VectorXd::Ones(1))[0] == doctest::Approx(3.5));

  const MarkKernel k(two_marks(), sym_q());
  const Eigen::VectorXd out = apply_kernel(k, Eigen::Vector2d(1, 1));
  CHECK(out[0] == doctest::Approx(1.5));
  CHECK(out[1] == doctest::Approx(1.5));

  const MarkKernel km(two_marks(), sym_q(), Eigen::Vector2d(2, 1));
  const Eigen::VectorXd r = apply_kernel(km, Eigen::Vector2d(1, 1), true);
  CHECK(r[0] == doctest::Approx(0.75));
  CHECK(r[1] == doctest::Approx(1.5));

  CHECK_THROWS_AS(apply_kernel(k, Eigen::VectorXd::Ones(3)), ShapeError);
}

TEST_CASE("leading eigen closed forms") {
  const MarkKernel one(MarkSpace::single(), Eigen::MatrixXd::Constant(1, 1, 2.0));
  const EigenData e1 = leading_eigen(one);
  CHECK(e1.r == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e1.q[0] == doctest::Approx(1.0));
  CHECK(e1.kappa_cr == doctest::Approx(0.5));

  const EigenData e = leading_eigen(MarkKernel(two_marks(), sym_q()));
  CHECK(std::abs(e.r - 1.5) < 1e-12);
  CHECK(std::abs(e.q[0] - 1.0) < 1e-10);
  CHECK(std::abs(e.q[1] - 1.0) < 1e-10);
  CHECK(std::abs(e.q_adj[0] - 1.0) < 1e-10);
  CHECK(e.kappa_cr == 1.0 / e.r);
  REQUIRE(e.spectral_gap);
  CHECK(std::abs(*e.spectral_gap - 1.0) < 1e-8);

  // rescaled by m = (2, 1): ((0.5, 0.25), (0.5, 1))
  const EigenData g = leading_eigen(MarkKernel(two_marks(), sym_q(), Eigen::Vector2d(2, 1)), true);
  const double r_expected = (1.5 + std::sqrt(0.75)) / 2.0;
  CHECK(std::abs(g.r - r_expected) < 1e-12);
  // eigenvector of ((0.5, 0.25), (0.5, 1)): (r - 0.5) g0 = 0.25 g1
  CHECK(std::abs((r_expected - 0.5) * g.q[0] - 0.25 * g.q[1]) < 1e-10);
  CHECK(std::abs(0.5 * g.q[0] + 0.5 * g.q[1] - 1.0) < 1e-12);
  CHECK(g.rescaled);
}

TEST_CASE("leading eigen agrees with a dense solver on random kernels") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 6;
    Eigen::VectorXd w(k);
    for (auto& x : w) x = u(rng);
    Eigen::MatrixXd q(k, k);
    for (auto& x : q.reshaped()) x = u(rng);
    const MarkKernel kernel(MarkSpace({}, w), q);
    const EigenData e = leading_eigen(kernel);
    const auto [r, v] = dense_dominant(q * w.asDiagonal());
    CHECK(std::abs(e.r - r) < 1e-10 * r);
    const Eigen::VectorXd vn = v / v.dot(w);
    CHECK((e.q - vn).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(e.q.minCoeff() > 0.0);
    CHECK(e.q_adj.minCoeff() > 0.0);
  }
}

TEST_CASE("leading eigen reports non-convergence") {
  Eigen::MatrixXd q(2, 2);
  q << 2, 1, 3, 4;
  EigenOptions opts;
  opts.max_iter = 1;
  try {
    leading_eigen(MarkKernel(two_marks(), q), false, opts);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("asymptotic density examples") {
  const MarkKernel k(two_marks(), sym_q());
  const EigenData e = leading_eigen(k);
  CHECK(asymptotic_density(e, k.space(), 2.0, e.q) == doctest::Approx(2.0));
  CHECK(asymptotic_density(e, k.space(), 1.0, Eigen::Vector2d(2, 0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(asymptotic_density(e, k.space(), 1.0, Eigen::Vector2d(1, 0)), ValidationError);

  Eigen::MatrixXd qa(2, 2);
  qa << 2, 1, 3, 4;
  const MarkKernel ka(two_marks(), qa);
  const EigenData ea = leading_eigen(ka);
  const Eigen::Vector2d nu(0.5, 0.5);
  const auto [r, right] = dense_dominant(qa * nu.asDiagonal());
  const auto [rl, left] = dense_dominant(qa.transpose() * nu.asDiagonal());
  const Eigen::Vector2d h(2, 0);
  const double expected =
      h.cwiseProduct(left).dot(nu) / right.cwiseProduct(left).dot(nu) * right.dot(nu);
  CHECK(std::abs(asymptotic_density(ea, ka.space(), 1.0, h) - expected) < 1e-10);
  CHECK(std::abs(r - 2.5) < 1e-12);
  CHECK(std::abs(rl - 2.5) < 1e-12);
}

TEST_CASE("kernel refinement converges for a smooth kernel") {
  const auto pts = kernel_refinement(
      [](Eigen::Index n) { return MarkKernel::exponential(MarkSpace::uniform_grid(n), 0.5); },
      {8, 16, 32, 64});
  REQUIRE(pts.size() == 4);
  const double d1 = std::abs(pts[2].r - pts[1].r);
  const double d2 = std::abs(pts[3].r - pts[2].r);
  CHECK(d2 < d1);
  CHECK(d2 < 1e-3);
}
