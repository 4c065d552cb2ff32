#pragma once

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "quasicontact/correlation_model.hpp"
#include "quasicontact/momentum_grid.hpp"

namespace qc {

/// Translation-invariant pair correlation on a momentum grid. The transform
/// part holds k2_hat(p; s1, s2) for p != 0; the p = 0 contribution is the
/// constant term rho^2 q(s1) q(s2), added back analytically in real space.
struct PairGrid {
  MomentumGrid grid;
  MarkSpace marks;
  double rho = 0.0;
  Eigen::MatrixXd constant_term;
  /// [mode][s1][s2], row-major per mode.
  std::vector<std::complex<double>> values;

  Eigen::Index K() const { return marks.size(); }
  std::complex<double>& at(std::size_t mode, Eigen::Index a, Eigen::Index b) {
    return values[(mode * K() + a) * K() + b];
  }
  std::complex<double> at(std::size_t mode, Eigen::Index a, Eigen::Index b) const {
    return values[(mode * K() + a) * K() + b];
  }
  Eigen::MatrixXcd mode_matrix(std::size_t mode) const;
};

/// rho * q after checking it solves -m k + kappa Q k = 0.
Eigen::VectorXd solve_k1(const CorrelationModel& model, double rho, double criticality_tol = 1e-9);

/// Nonsingular part of the markless stationary pair transform,
/// rho (a(p) + a(-p)) / (2 - a(p) - a(-p)). Throws SingularModeError at p = 0.
double markless_pair_hat(const DispersalKernel& dispersal, double rho, std::span<const double> p);

struct ModeSolution {
  Eigen::MatrixXcd value;
  double rcond = 1.0;
  bool near_singular = false;
};

/// Dense LU solve of the stationary pair system at one momentum p != 0.
ModeSolution solve_pair_mode(const CorrelationModel& model, double rho, std::span<const double> p);

struct PairSolveReport {
  double min_rcond = 1.0;
  std::size_t near_singular_modes = 0;
};

/// Stationary pair correlation on every mode of `grid`. Requires criticality.
PairGrid solve_pair_grid(const CorrelationModel& model, double rho, const MomentumGrid& grid,
                         PairSolveReport* report = nullptr);

struct AssemblyWarning {
  bool out_of_range = false;
};

/// k2(w; s1, s2) = constant + Riemann-sum inverse transform over the grid.
Eigen::MatrixXd assemble_pair_real(const PairGrid& pair, std::span<const double> w,
                                   AssemblyWarning* warning = nullptr);

struct RayPoint {
  double separation;
  Eigen::MatrixXd value;
};

/// assemble_pair_real at w = t * direction / |direction| for each t.
std::vector<RayPoint> pair_ray(const PairGrid& pair, std::span<const double> direction,
                               std::span<const double> separations);

struct StationarityResidual {
  /// max over modes of |(L2 k2_hat + f2_hat)(p)|.
  double modes = 0.0;
  /// residual of the constant term under the p = 0 generator.
  double constant = 0.0;
  double max() const { return std::max(modes, constant); }
};

/// Applies the discretized pair generator to an assembled solution and adds
/// the forcing built from k1 = rho q.
StationarityResidual stationarity_residual(const CorrelationModel& model, const PairGrid& pair);

/// Smallest B with k2(w; a, b) <= B q_a q_b over the sampled points.
double correlation_bound(const PairGrid& pair, std::span<const RayPoint> samples);

/// Continuum k2 at separations r e_1 for an isotropic, centered dispersal in
/// d = 3, from per-mode solutions along the p_1 axis:
///   rho^2 q q^T + 1 / (2 pi^2 r) * int_0^p_max X(p) p sin(p r) dp
/// by composite Simpson with `intervals` (even) subintervals.
std::vector<RayPoint> radial_pair_profile(const CorrelationModel& model, double rho,
                                          std::span<const double> separations, double p_max,
                                          int intervals = 20000);

struct RefinementLevel {
  int points_per_axis;
  double spacing;
  double value;
  /// Richardson value from this level and the previous one.
  std::optional<double> extrapolated;
};

struct CriticalityIntegralReport {
  double value = 0.0;
  std::vector<RefinementLevel> sequence;
  /// Error order assumed by the extrapolation: max(d - 2, 1).
  int order = 1;
  /// Relative change between the last two extrapolated values.
  std::optional<double> last_relative_change;
  bool converged(double tol = 0.01) const {
    return last_relative_change && std::abs(*last_relative_change) < tol;
  }
  bool diverging(double growth = 0.20) const {
    return last_relative_change && *last_relative_change > growth;
  }
};

/// Grid quadrature of the integral of |a(p)| / (2 - a(p) - a(-p)) with p = 0
/// excluded: on `grid`, then on the same extent at each entry of
/// `refinement` (points per axis, increasing).
CriticalityIntegralReport criticality_integral(const DispersalKernel& dispersal,
                                               const MomentumGrid& grid,
                                               const std::vector<int>& refinement = {17, 33, 65});

/// Grid quadrature at one resolution.
double criticality_sum(const DispersalKernel& dispersal, const MomentumGrid& grid);

}  // namespace qc
