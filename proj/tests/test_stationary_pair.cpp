#include <Eigen/LU>

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "quasicontact/errors.hpp"
#include "quasicontact/stationary_pair.hpp"

using namespace qc;
using std::numbers::pi;

namespace {

MarkKernel two_mark_kernel(bool symmetric = true) {
  Eigen::MatrixXd q(2, 2);
  if (symmetric) q << 2, 1, 1, 2;
  else q << 2, 1, 3, 4;
  return MarkKernel(MarkSpace({}, Eigen::Vector2d(0.5, 0.5)), q);
}

MarkKernel markless() { return MarkKernel(MarkSpace::single(), Eigen::MatrixXd::Ones(1, 1)); }

// The 4 x 4 stationary system assembled entry by entry:
//   sum_{c,d} [delta (m_a + m_b) - kappa a Qt_ac delta_bd - kappa conj(a) delta_ac Qt_bd] X_cd = F_ab
Eigen::Matrix2cd brute_force_mode(const Eigen::MatrixXd& q, const Eigen::Vector2d& nu, double kappa,
                                  const Eigen::Vector2d& k1, std::complex<double> a) {
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
  Eigen::Vector4cd f;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const int row = 2 * i + j;
      f[row] = kappa * (a * q(i, j) * k1[j] + std::conj(a) * q(j, i) * k1[i]);
      for (int c = 0; c < 2; ++c)
        for (int e = 0; e < 2; ++e) {
          const int col = 2 * c + e;
          std::complex<double> v = 0.0;
          if (i == c && j == e) v += 2.0;
          if (j == e) v -= kappa * a * q(i, c) * nu[c];
          if (i == c) v -= kappa * std::conj(a) * q(j, e) * nu[e];
          m(row, col) = v;
        }
    }
  const Eigen::Vector4cd x = m.fullPivLu().solve(f);
  Eigen::Matrix2cd out;
  out << x[0], x[1], x[2], x[3];
  return out;
}

}  // namespace

TEST_CASE("solve_k1") {
  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  const auto m1 = CorrelationModel::critical(markless(), g);
  CHECK(solve_k1(m1, 2.0)[0] == doctest::Approx(2.0));

  const auto m2 = CorrelationModel::critical(two_mark_kernel(), g);
  const Eigen::VectorXd k1 = solve_k1(m2, 1.0);
  CHECK(std::abs(k1[0] - 1.0) < 1e-10);
  CHECK(std::abs(k1[1] - 1.0) < 1e-10);
  CHECK((m2.k1_generator() * k1).cwiseAbs().maxCoeff() < 1e-10);

  const auto off = CorrelationModel::with_kappa(two_mark_kernel(), g, 1.0);
  CHECK_THROWS_AS(solve_k1(off, 1.0), CriticalityError);
}

TEST_CASE("markless pair transform") {
  // sigma^2 = 2 ln 2 puts alpha_hat(1) = 1/2
  const auto half = DispersalKernel::isotropic_gaussian(1, std::sqrt(2.0 * std::log(2.0)));
  const double one[1] = {1.0};
  CHECK(markless_pair_hat(half, 1.0, one) == doctest::Approx(1.0).epsilon(1e-14));

  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  const double p[3] = {1, 0, 0};
  const double e = std::exp(-0.5);
  CHECK(markless_pair_hat(g, 2.0, p) == doctest::Approx(2.0 * 2.0 * e / (2.0 - 2.0 * e)).epsilon(1e-14));
  const double far[3] = {40, 0, 0};
  CHECK(markless_pair_hat(g, 3.0, far) == 0.0);
  const double zero[3] = {0, 0, 0};
  CHECK_THROWS_AS(markless_pair_hat(g, 1.0, zero), SingularModeError);
}

TEST_CASE("mode solver") {
  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  const auto m1 = CorrelationModel::critical(markless(), g);
  const MomentumGrid grid(3, 4.0, 9);
  for (std::size_t m = 0; m < grid.mode_count(); m += 37) {
    const auto p = grid.mode(m);
    const auto sol = solve_pair_mode(m1, 1.5, p);
    CHECK(std::abs(sol.value(0, 0) - markless_pair_hat(g, 1.5, p)) < 1e-12);
  }

  const auto m2 = CorrelationModel::critical(two_mark_kernel(), g);
  const double p[3] = {1, 0, 0};
  const auto sol = solve_pair_mode(m2, 1.0, p);
  const Eigen::Matrix2cd oracle = brute_force_mode(two_mark_kernel().q_matrix(), Eigen::Vector2d(0.5, 0.5),
                                                   m2.kappa, Eigen::Vector2d(1, 1), std::exp(-0.5));
  CHECK((sol.value - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(sol.near_singular);

  // residual of the returned solution in the mode system
  Eigen::VectorXcd x(4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) x[2 * a + b] = sol.value(a, b);
  const auto alpha = g.char_fn(p);
  const Eigen::VectorXcd r = pair_mode_generator(m2, alpha) * x + pair_mode_forcing(m2, alpha, solve_k1(m2, 1.0));
  CHECK(r.cwiseAbs().maxCoeff() < 1e-10);

  const double zero[3] = {0, 0, 0};
  CHECK_THROWS_AS(solve_pair_mode(m2, 1.0, zero), SingularModeError);
}

TEST_CASE("pair grid symmetries and residual") {
  Eigen::Matrix3d cov;
  cov << 1.0, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.2;
  const auto drift = DispersalKernel::gaussian(cov, Eigen::Vector3d(0.3, 0.0, -0.2));
  const auto model = CorrelationModel::critical(two_mark_kernel(false), drift);
  const MomentumGrid grid(3, 5.0, 11);
  PairSolveReport report;
  const PairGrid pair = solve_pair_grid(model, 1.3, grid, &report);
  CHECK(report.near_singular_modes == 0);

  for (std::size_t m = 0; m < grid.mode_count(); m += 17) {
    const Eigen::MatrixXcd x = pair.mode_matrix(m);
    const Eigen::MatrixXcd xn = pair.mode_matrix(grid.negated(m));
    CHECK((xn - x.conjugate()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((xn - x.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }

  const double w[3] = {0.4, -0.3, 0.7};
  const double wn[3] = {-0.4, 0.3, -0.7};
  const Eigen::MatrixXd kw = assemble_pair_real(pair, w);
  const Eigen::MatrixXd kwn = assemble_pair_real(pair, wn);
  CHECK((kw.transpose() - kwn).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(stationarity_residual(model, pair).max() <= 1e-8);

  AssemblyWarning warn;
  const double big[3] = {10.0, 0.0, 0.0};
  assemble_pair_real(pair, big, &warn);
  CHECK(warn.out_of_range);
}

TEST_CASE("markless assembly matches a direct lattice sum") {
  const double rho = 1.0;
  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  const auto model = CorrelationModel::critical(markless(), g);
  const MomentumGrid grid(3, 6.0, 25);
  const PairGrid pair = solve_pair_grid(model, rho, grid);

  const double dp = 12.0 / 24.0;
  const double weight = std::pow(dp / (2.0 * pi), 3);
  for (int i = 0; i < 20; ++i) {
    const double t = 0.25 + 0.25 * i;
    const double w[3] = {t * 0.6, t * 0.0, t * 0.8};
    double sum = 0.0;
    for (int a = 0; a < 25; ++a)
      for (int b = 0; b < 25; ++b)
        for (int c = 0; c < 25; ++c) {
          if (a == 12 && b == 12 && c == 12) continue;
          const double px = -6.0 + dp * a, py = -6.0 + dp * b, pz = -6.0 + dp * c;
          const double s = 2.0 * std::exp(-0.5 * (px * px + py * py + pz * pz));
          sum += std::cos(px * w[0] + py * w[1] + pz * w[2]) * rho * s / (2.0 - s);
        }
    const double direct = rho * rho + weight * sum;
    CHECK(std::abs(assemble_pair_real(pair, w)(0, 0) - direct) < 1e-6);
  }
}

TEST_CASE("assembled correlation decays toward the product") {
  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  const auto model = CorrelationModel::critical(two_mark_kernel(), g);
  const MomentumGrid grid(3, 6.0, 25);
  const PairGrid pair = solve_pair_grid(model, 1.0, grid);
  const double dir[3] = {1, 0, 0};
  const std::vector<double> seps = {0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
  const auto ray = pair_ray(pair, dir, seps);
  double previous = 1e300;
  for (const auto& pt : ray) {
    const double excess = (pt.value - pair.constant_term).cwiseAbs().maxCoeff();
    CHECK(excess <= previous + 1e-6);
    previous = excess;
    CHECK(pt.value.minCoeff() > 0.0);
  }
  const double b = correlation_bound(pair, ray);
  CHECK(std::isfinite(b));
  CHECK(b >= 1.0);
}

TEST_CASE("criticality integral dimension dependence") {
  const auto r3 = criticality_integral(DispersalKernel::isotropic_gaussian(3, 1.0), MomentumGrid(3, 8.0, 17));
  CHECK(r3.converged(0.01));
  CHECK(r3.sequence.size() == 3);
  const auto r2 = criticality_integral(DispersalKernel::isotropic_gaussian(2, 1.0), MomentumGrid(2, 8.0, 17));
  CHECK(r2.diverging(0.20));
  const auto r1 = criticality_integral(DispersalKernel::isotropic_gaussian(1, 1.0), MomentumGrid(1, 8.0, 17));
  CHECK(*r1.last_relative_change > *r2.last_relative_change);
  // raw sums grow in every dimension below three
  CHECK(r2.sequence[2].value > r2.sequence[1].value);
}
