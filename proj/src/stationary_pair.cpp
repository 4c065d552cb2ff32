#include "quasicontact/stationary_pair.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "quasicontact/errors.hpp"

namespace qc {

namespace {

using RowMajorC = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_positive_prefactor(std::complex<double> alpha_hat) {
  const double prefactor = 2.0 - 2.0 * alpha_hat.real();
  if (!(prefactor > 0.0))
    throw SingularModeError("2 - a(p) - a(-p) = " + std::to_string(prefactor) +
                            " is not positive on a nonzero mode");
}

}  // namespace

Eigen::MatrixXcd PairGrid::mode_matrix(std::size_t mode) const {
  const Eigen::Index k = K();
  return Eigen::Map<const RowMajorC>(values.data() + mode * k * k, k, k);
}

Eigen::VectorXd solve_k1(const CorrelationModel& model, double rho, double criticality_tol) {
  if (!(rho > 0.0)) throw ValidationError("solve_k1: rho must be positive");
  if (!model.critical_within(criticality_tol))
    throw CriticalityError("solve_k1: kappa * r = " + std::to_string(model.kappa * model.eigen.r) +
                           " is not 1; no positive bounded stationary density exists");
  const Eigen::VectorXd k1 = rho * model.eigen.q;
  const double residual = (model.k1_generator() * k1).cwiseAbs().maxCoeff();
  if (residual > 1e-8 * std::max(1.0, rho))
    throw ConvergenceError("solve_k1: rho q does not solve the stationary equation", residual);
  return k1;
}

double markless_pair_hat(const DispersalKernel& dispersal, double rho, std::span<const double> p) {
  if (std::all_of(p.begin(), p.end(), [](double x) { return x == 0.0; }))
    throw SingularModeError("markless_pair_hat: p = 0 is the singular mode");
  const double s = dispersal.symmetrized_char_fn(p);
  if (!(2.0 - s > 0.0)) throw SingularModeError("markless_pair_hat: 2 - a(p) - a(-p) <= 0");
  return rho * s / (2.0 - s);
}

ModeSolution solve_pair_mode(const CorrelationModel& model, double rho, std::span<const double> p) {
  if (std::all_of(p.begin(), p.end(), [](double x) { return x == 0.0; }))
    throw SingularModeError("solve_pair_mode: p = 0 is the singular mode");
  const std::complex<double> alpha_hat = model.dispersal.char_fn(p);
  require_positive_prefactor(alpha_hat);
  const Eigen::VectorXd k1 = solve_k1(model, rho);
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(-pair_mode_generator(model, alpha_hat));
  const Eigen::VectorXcd x = lu.solve(pair_mode_forcing(model, alpha_hat, k1));
  const Eigen::Index k = model.marks();
  ModeSolution out;
  out.value = Eigen::Map<const RowMajorC>(x.data(), k, k);
  out.rcond = lu.rcond();
  out.near_singular = out.rcond < 1e-12;
  return out;
}

PairGrid solve_pair_grid(const CorrelationModel& model, double rho, const MomentumGrid& grid,
                         PairSolveReport* report) {
  const Eigen::VectorXd k1 = solve_k1(model, rho);
  const auto alpha = char_fn_table(model.dispersal, grid);
  for (const auto& a : alpha) require_positive_prefactor(a);

  const Eigen::Index k = model.marks();
  const Eigen::Index kk = k * k;
  PairGrid pair{grid, model.kernel.space(), rho, k1 * k1.transpose(), {}};
  pair.values.resize(grid.mode_count() * static_cast<std::size_t>(kk));

  const long modes = static_cast<long>(grid.mode_count());
  double min_rcond = 1.0;
  std::size_t near_singular = 0;
#pragma omp parallel
  {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(kk);
    double local_min = 1.0;
    std::size_t local_bad = 0;
#pragma omp for schedule(static)
    for (long m = 0; m < modes; ++m) {
      lu.compute(-pair_mode_generator(model, alpha[m]));
      const Eigen::VectorXcd x = lu.solve(pair_mode_forcing(model, alpha[m], k1));
      std::copy(x.data(), x.data() + kk, pair.values.begin() + m * kk);
      const double rc = lu.rcond();
      local_min = std::min(local_min, rc);
      if (rc < 1e-12) ++local_bad;
    }
#pragma omp critical
    {
      min_rcond = std::min(min_rcond, local_min);
      near_singular += local_bad;
    }
  }
  if (report) *report = {min_rcond, near_singular};
  return pair;
}

Eigen::MatrixXd assemble_pair_real(const PairGrid& pair, std::span<const double> w,
                                   AssemblyWarning* warning) {
  const MomentumGrid& grid = pair.grid;
  const int d = grid.dim();
  const int n = grid.points_per_axis();
  if (static_cast<int>(w.size()) != d) throw ShapeError("assemble_pair_real: w has the wrong dimension");
  if (warning) {
    warning->out_of_range = std::any_of(w.begin(), w.end(), [&](double x) {
      return std::abs(x) >= grid.resolvable_range();
    });
  }

  std::vector<std::vector<std::complex<double>>> phase(d, std::vector<std::complex<double>>(n));
  for (int a = 0; a < d; ++a)
    for (int j = 0; j < n; ++j) phase[a][j] = std::polar(1.0, -grid.axis_value(j) * w[a]);

  const Eigen::Index k = pair.K();
  const Eigen::Index kk = k * k;
  std::vector<std::complex<double>> sum(kk, 0.0);
  std::vector<int> idx(d, 0);
  const std::size_t total = grid.lattice_size();
  const std::size_t center = total / 2;
  std::size_t mode = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    if (flat != center) {
      std::complex<double> e = phase[0][idx[0]];
      for (int a = 1; a < d; ++a) e *= phase[a][idx[a]];
      const std::complex<double>* v = pair.values.data() + mode * kk;
      for (Eigen::Index c = 0; c < kk; ++c) sum[c] += e * v[c];
      ++mode;
    }
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < n) break;
      idx[a] = 0;
    }
  }
  Eigen::MatrixXd out = pair.constant_term;
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) out(a, b) += grid.inverse_weight() * sum[a * k + b].real();
  return out;
}

std::vector<RayPoint> pair_ray(const PairGrid& pair, std::span<const double> direction,
                               std::span<const double> separations) {
  double norm = 0.0;
  for (double x : direction) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw ValidationError("pair_ray: direction must be nonzero");
  std::vector<RayPoint> out;
  std::vector<double> w(direction.size());
  for (double t : separations) {
    for (std::size_t a = 0; a < w.size(); ++a) w[a] = t * direction[a] / norm;
    out.push_back({t, assemble_pair_real(pair, w)});
  }
  return out;
}

StationarityResidual stationarity_residual(const CorrelationModel& model, const PairGrid& pair) {
  const Eigen::Index k = model.marks();
  if (pair.K() != k) throw ShapeError("stationarity_residual: mark count mismatch");
  const Eigen::VectorXd k1 = pair.rho * model.eigen.q;
  const auto alpha = char_fn_table(model.dispersal, pair.grid);
  StationarityResidual out;
  Eigen::VectorXcd x(k * k);
  for (std::size_t m = 0; m < pair.grid.mode_count(); ++m) {
    std::copy(pair.values.begin() + m * k * k, pair.values.begin() + (m + 1) * k * k, x.data());
    const Eigen::VectorXcd r = pair_mode_generator(model, alpha[m]) * x +
                               pair_mode_forcing(model, alpha[m], k1);
    out.modes = std::max(out.modes, r.cwiseAbs().maxCoeff());
  }
  const Eigen::MatrixXd g = model.k1_generator();
  const Eigen::MatrixXd rc = g * pair.constant_term + pair.constant_term * g.transpose();
  out.constant = rc.cwiseAbs().maxCoeff();
  return out;
}

std::vector<RayPoint> radial_pair_profile(const CorrelationModel& model, double rho,
                                          std::span<const double> separations, double p_max,
                                          int intervals) {
  if (model.dispersal.dim() != 3) throw ShapeError("radial_pair_profile: needs d = 3");
  if (!model.dispersal.centered()) throw ValidationError("radial_pair_profile: dispersal must be centered");
  if (intervals < 2 || intervals % 2) throw ValidationError("radial_pair_profile: intervals must be even");
  if (!(p_max > 0.0)) throw ValidationError("radial_pair_profile: p_max must be positive");
  const Eigen::VectorXd k1 = solve_k1(model, rho);
  const Eigen::Index k = model.marks();
  const double h = p_max / intervals;

  // real part of X(p e_1) at every node. X ~ C / p^2 + D at the origin, so
  // the integrand tends to C r there. C comes from two small momenta with the
  // D p^2 term eliminated; much smaller p loses digits in 1 - alpha_hat.
  std::vector<Eigen::MatrixXd> x(intervals + 1, Eigen::MatrixXd::Zero(k, k));
  for (int i = 1; i <= intervals; ++i) {
    const double p[3] = {i * h, 0.0, 0.0};
    x[i] = solve_pair_mode(model, rho, p).value.real();
  }
  auto scaled = [&](double p) {
    const double at[3] = {p, 0.0, 0.0};
    return Eigen::MatrixXd(solve_pair_mode(model, rho, at).value.real() * p * p);
  };
  const double probe = 1e-3 / model.dispersal.max_std();
  const Eigen::MatrixXd origin = (4.0 * scaled(probe) - scaled(2.0 * probe)) / 3.0;
  std::vector<RayPoint> out;
  for (double r : separations) {
    if (!(r > 0.0)) throw ValidationError("radial_pair_profile: separations must be positive");
    Eigen::MatrixXd sum = origin * r;
    for (int i = 1; i <= intervals; ++i) {
      const double p = i * h;
      const double w = i == intervals ? 1.0 : (i % 2 ? 4.0 : 2.0);
      sum += w * p * std::sin(p * r) * x[i];
    }
    sum *= h / 3.0 / (2.0 * std::numbers::pi * std::numbers::pi * r);
    out.push_back({r, k1 * k1.transpose() + sum});
  }
  return out;
}

double correlation_bound(const PairGrid& pair, std::span<const RayPoint> samples) {
  const Eigen::MatrixXd qq = pair.constant_term / (pair.rho * pair.rho);
  double bound = 0.0;
  for (const auto& s : samples) bound = std::max(bound, s.value.cwiseQuotient(qq).maxCoeff());
  return bound;
}

double criticality_sum(const DispersalKernel& dispersal, const MomentumGrid& grid) {
  const auto alpha = char_fn_table(dispersal, grid);
  double sum = 0.0;
  for (const auto& a : alpha) {
    require_positive_prefactor(a);
    sum += std::abs(a) / (2.0 - 2.0 * a.real());
  }
  return sum * grid.cell_volume();
}

CriticalityIntegralReport criticality_integral(const DispersalKernel& dispersal,
                                               const MomentumGrid& grid,
                                               const std::vector<int>& refinement) {
  CriticalityIntegralReport report;
  report.value = criticality_sum(dispersal, grid);
  report.order = std::max(grid.dim() - 2, 1);
  for (int n : refinement) {
    const MomentumGrid level(grid.dim(), grid.extent(), n);
    RefinementLevel entry{n, level.spacing(), criticality_sum(dispersal, level), std::nullopt};
    if (!report.sequence.empty()) {
      const auto& prev = report.sequence.back();
      const double factor = std::pow(prev.spacing / entry.spacing, report.order);
      entry.extrapolated = (factor * entry.value - prev.value) / (factor - 1.0);
    }
    report.sequence.push_back(entry);
  }
  const auto n = report.sequence.size();
  if (n >= 3) {
    const double last = *report.sequence[n - 1].extrapolated;
    const double prev = *report.sequence[n - 2].extrapolated;
    report.last_relative_change = (last - prev) / std::abs(prev);
  }
  return report;
}

}  // namespace qc
