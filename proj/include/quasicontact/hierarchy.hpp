#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "quasicontact/correlation_model.hpp"
#include "quasicontact/stationary_pair.hpp"

namespace qc {

struct K1State {
  double time;
  Eigen::VectorXd values;
};

/// 0.01 / (1 + kappa ||Q diag(nu)||_inf).
double default_time_step(const MarkKernel& kernel, double kappa);

/// RK4 integration of dk/dt = kappa (Qk) - m k from `initial` to t_end.
/// States are recorded at t = 0, every `sample_interval` (rounded to whole
/// steps) and at t_end. The step is shrunk so that t_end is hit exactly.
/// Throws StabilityError when dt lies outside the RK4 stability region.
std::vector<K1State> evolve_k1(const MarkKernel& kernel, double kappa,
                               const Eigen::VectorXd& initial, double t_end, double dt,
                               double sample_interval = 0.0);

enum class Forcing {
  /// f2(t) built from k1(t), which is integrated alongside.
  SelfConsistent,
  /// f2 built from the initial k1 for all t.
  Frozen,
  /// Homogeneous equation (no forcing).
  None,
};

struct K2Options {
  double t_end = 0.0;
  /// <= 0 selects default_time_step.
  double dt = 0.0;
  /// Recorded in addition to t_end; rounded to whole steps.
  std::vector<double> sample_times;
  Forcing forcing = Forcing::SelfConsistent;
  /// First correlation function at t = 0; defaults to rho q.
  std::optional<Eigen::VectorXd> k1_initial;
  /// Transform part at t = 0; zero when absent.
  const PairGrid* initial = nullptr;
  /// Also integrate the p = 0 mode (meaningful on a torus-commensurate grid,
  /// where it is one Fourier coefficient of a finite-volume system).
  bool zero_mode = false;
};

struct K2State {
  double time;
  Eigen::VectorXd k1;
  /// Transform part on the grid; constant_term = k1 k1^T.
  PairGrid pair;
  std::optional<Eigen::MatrixXcd> zero_mode;
};

/// Mode-wise RK4 integration of the pair equation
///   dX/dt = kappa a(p) Q~ X + kappa conj(a(p)) X Q~^T - (m_a + m_b) X + F(p, k1(t)).
std::vector<K2State> evolve_k2(const CorrelationModel& model, double rho, const MomentumGrid& grid,
                               const K2Options& options);

struct ConvergencePoint {
  double time;
  double distance;
};

/// Sup-norm over marks of k1(t) - target.
std::vector<ConvergencePoint> convergence_report(std::span<const K1State> trajectory,
                                                 const Eigen::VectorXd& target);

/// Real-space sup-norm bound: max over mark pairs of
/// |constant difference| + (dp / 2 pi)^d sum_p |X(p) - X_target(p)|.
double pair_distance(const PairGrid& a, const PairGrid& b);
std::vector<ConvergencePoint> convergence_report(std::span<const K2State> trajectory,
                                                 const PairGrid& target);

}  // namespace qc
