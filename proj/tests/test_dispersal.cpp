#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "quasicontact/dispersal.hpp"
#include "quasicontact/errors.hpp"

using namespace qc;
using std::numbers::pi;

namespace {

// Gaussian sigma = 1 sampled on [-6, 6]^d.
TabulatedFamily gaussian_table(int d, int n, double scale = 1.0) {
  TabulatedFamily t;
  std::vector<double> axis(n);
  for (int j = 0; j < n; ++j) axis[j] = -6.0 + 12.0 * j / (n - 1);
  t.axes.assign(d, axis);
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= n;
  t.values.resize(total);
  std::vector<int> idx(d, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += axis[idx[a]] * axis[idx[a]];
    t.values[flat] = scale * std::exp(-0.5 * r2) / std::pow(2.0 * pi, 0.5 * d);
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < n) break;
      idx[a] = 0;
    }
  }
  return t;
}

// Composite Simpson on [0, b].
template <class F>
double simpson(F f, double b, int n = 2000) {
  const double h = b / n;
  double s = f(0.0) + f(b);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("density examples") {
  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  const double origin[3] = {0, 0, 0};
  CHECK(g.density(origin) == doctest::Approx(std::pow(2 * pi, -1.5)).epsilon(1e-14));

  const auto ball = DispersalKernel::uniform_ball(3, 1.0);
  CHECK(ball.density(origin) == doctest::Approx(3.0 / (4.0 * pi)).epsilon(1e-14));
  const double outside[3] = {0.8, 0.7, 0.0};
  CHECK(ball.density(outside) == 0.0);

  const double bad[3] = {NAN, 0, 0};
  CHECK_THROWS_AS(g.density(bad), ValidationError);
}

TEST_CASE("characteristic functions") {
  const double zero[3] = {0, 0, 0};
  CHECK(DispersalKernel::isotropic_gaussian(3, 2.0).char_fn(zero) == std::complex<double>(1.0, 0.0));
  CHECK(DispersalKernel::uniform_ball(3, 1.5).char_fn(zero) == std::complex<double>(1.0, 0.0));

  const double sigma = 1.7;
  const double p[3] = {0.3, -0.4, 0.2};
  const double p2 = 0.09 + 0.16 + 0.04;
  const auto g = DispersalKernel::isotropic_gaussian(3, sigma);
  CHECK(std::abs(g.char_fn(p) - std::exp(-0.5 * sigma * sigma * p2)) < 1e-15);

  // drifted anisotropic gaussian against exp(i p.mu - p.S.p / 2)
  Eigen::Matrix2d cov;
  cov << 2.0, 0.5, 0.5, 1.0;
  const Eigen::Vector2d mu(0.3, -1.0);
  const auto ga = DispersalKernel::gaussian(cov, mu);
  const double q[2] = {0.7, 0.2};
  const Eigen::Vector2d qv(0.7, 0.2);
  const std::complex<double> expected =
      std::exp(std::complex<double>(-0.5 * qv.dot(cov * qv), qv.dot(mu)));
  CHECK(std::abs(ga.char_fn(q) - expected) < 1e-14);
  CHECK(ga.symmetrized_char_fn(q) == doctest::Approx(2.0 * expected.real()));

  // ball transforms against direct radial / planar quadrature
  const double radius = 1.3;
  const auto b3 = DispersalKernel::uniform_ball(3, radius);
  for (double k : {0.5, 2.0, 7.0}) {
    const double px[3] = {k, 0, 0};
    const double direct = 3.0 / std::pow(radius, 3) *
                          simpson([&](double r) { return r == 0.0 ? 0.0 : r * std::sin(k * r) / k; }, radius);
    CHECK(std::abs(b3.char_fn(px).real() - direct) < 1e-10);
  }
  const auto b2 = DispersalKernel::uniform_ball(2, radius);
  for (double k : {0.5, 3.0}) {
    const double px[2] = {k, 0};
    // integral over the disk of cos(k x) = int_{-R}^{R} 2 sqrt(R^2 - x^2) cos(k x) dx
    const double direct =
        2.0 * simpson([&](double x) { return 2.0 * std::sqrt(std::max(0.0, radius * radius - x * x)) * std::cos(k * x); },
                      radius, 200000) /
        (pi * radius * radius);
    CHECK(std::abs(b2.char_fn(px).real() - direct) < 1e-6);
  }
  const auto b1 = DispersalKernel::uniform_ball(1, 2.0);
  const double p1[1] = {0.9};
  CHECK(b1.char_fn(p1).real() == doctest::Approx(std::sin(1.8) / 1.8));
  const double tiny[1] = {1e-7};
  CHECK(b1.char_fn(tiny).real() == doctest::Approx(1.0));
}

TEST_CASE("tabulated kernel matches the gaussian") {
  const auto t = DispersalKernel::tabulated(gaussian_table(3, 49));
  const double p[3] = {1, 0, 0};
  CHECK(std::abs(t.char_fn(p) - std::exp(-0.5)) < 1e-6);
  const double zero[3] = {0, 0, 0};
  CHECK(t.char_fn(zero).real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.covariance().isApprox(Eigen::Matrix3d::Identity(), 1e-6));
  const double u[3] = {0.1, 0.2, -0.3};
  CHECK(t.density(u) == doctest::Approx(std::exp(-0.07) / std::pow(2 * pi, 1.5)).epsilon(2e-2));
}

TEST_CASE("tabulated kernel from csv") {
  const std::string path = "test_dispersal_table.csv";
  {
    std::ofstream out(path);
    out << "u,density\n";
    const auto t = gaussian_table(1, 121);
    for (std::size_t j = 0; j < t.axes[0].size(); ++j) out << t.axes[0][j] << "," << t.values[j] << "\n";
  }
  const auto k = DispersalKernel::load_tabulated_csv(path);
  std::remove(path.c_str());
  CHECK(k.dim() == 1);
  CHECK(k.mass() == doctest::Approx(1.0).epsilon(1e-6));
  const double p[1] = {2.0};
  CHECK(std::abs(k.char_fn(p) - std::exp(-2.0)) < 1e-6);
}

TEST_CASE("sampling") {
  const auto g = DispersalKernel::isotropic_gaussian(3, 1.0);
  Rng rng(42);
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto u = g.sample_displacement(rng);
    const Eigen::Vector3d v(u[0], u[1], u[2]);
    second += v * v.transpose();
  }
  second /= n;
  CHECK((second - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 0.05);

  const auto ball = DispersalKernel::uniform_ball(3, 0.7);
  double mean_r2 = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const auto u = ball.sample_displacement(rng);
    const double r2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    CHECK(r2 <= 0.49 + 1e-12);
    mean_r2 += r2 / 20000;
  }
  // E|u|^2 = 3 R^2 / 5
  CHECK(mean_r2 == doctest::Approx(0.6 * 0.49).epsilon(0.02));

  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) CHECK(g.sample_displacement(a) == g.sample_displacement(b));

  const auto t = DispersalKernel::tabulated(gaussian_table(2, 61));
  double var = 0.0;
  for (int i = 0; i < 50000; ++i) {
    const auto u = t.sample_displacement(rng);
    var += u[0] * u[0] / 50000;
  }
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("validation reports") {
  const MomentumGrid grid(3, 4.0, 9);
  CHECK(validate(DispersalKernel::isotropic_gaussian(3, 1.0), grid).passed());

  const auto light = DispersalKernel::tabulated(gaussian_table(3, 31, 0.9));
  const auto r = validate(light, grid);
  CHECK_FALSE(r.check("mass").passed);
  CHECK(r.check("mass").value == doctest::Approx(0.9).epsilon(1e-4));

  Eigen::Matrix3d singular = Eigen::Matrix3d::Identity();
  singular(2, 2) = 0.0;
  const auto flat = DispersalKernel::gaussian(singular);
  const auto rf = validate(flat, grid);
  CHECK_FALSE(rf.check("covariance").passed);
  const double u[3] = {0, 0, 0};
  CHECK(flat.density(u) == 0.0);
}
