#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qc {

/// Quadrature discretization of the mark space: K nodes with positive
/// weights of the mark measure. Weights need not sum to one.
class MarkSpace {
 public:
  MarkSpace(std::vector<std::string> labels, Eigen::VectorXd weights,
            Eigen::VectorXd coordinates = {});

  /// K midpoint nodes on [0, 1] with weights 1/K.
  static MarkSpace uniform_grid(Eigen::Index count);
  /// A single mark of unit weight (the markless model).
  static MarkSpace single();

  Eigen::Index size() const { return weights_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  /// Node positions when the space came from a grid on [0, 1]; empty otherwise.
  const Eigen::VectorXd& coordinates() const { return coordinates_; }
  double total_mass() const { return weights_.sum(); }

  /// Sum_i a_i b_i nu_i.
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

 private:
  std::vector<std::string> labels_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd coordinates_;
};

/// Mutation kernel Q(s_i, s_j) on the nodes, plus per-mark mortality.
/// Entry (i, j) is the rate density for a parent of mark j to produce a
/// child of mark i.
class MarkKernel {
 public:
  MarkKernel(MarkSpace space, Eigen::MatrixXd q_matrix,
             Eigen::VectorXd mortality = {});

  /// Q(s, s') = value for every pair.
  static MarkKernel uniform(MarkSpace space, double value = 1.0);
  /// Q(s, s') = amplitude * exp(-|s - s'| / length) on the node coordinates.
  static MarkKernel exponential(MarkSpace space, double length,
                                double amplitude = 1.0);

  const MarkSpace& space() const { return space_; }
  Eigen::Index size() const { return space_.size(); }
  const Eigen::MatrixXd& q_matrix() const { return q_; }
  const Eigen::VectorXd& mortality() const { return mortality_; }
  bool homogeneous_mortality() const;

  /// Matrix of h -> (Qh)(s_i) = sum_j Q_ij h_j nu_j, rows divided by m_i when
  /// rescaled.
  Eigen::MatrixXd operator_matrix(bool rescaled) const;
  /// Matrix of the adjoint operator, kernel Q*(s, s') = Q(s', s) (with the
  /// rescaled kernel Q(s', s) / m(s') when rescaled).
  Eigen::MatrixXd adjoint_matrix(bool rescaled) const;

 private:
  MarkSpace space_;
  Eigen::MatrixXd q_;
  Eigen::VectorXd mortality_;
};

struct EigenOptions {
  double tol = 1e-12;
  long max_iter = 100000;
};

/// Leading eigenstructure of the (possibly mortality-rescaled) mark operator.
struct EigenData {
  double r = 0.0;
  /// Right eigenfunction, normalized so that sum_i q_i nu_i = 1.
  Eigen::VectorXd q;
  /// Eigenfunction of the adjoint, same normalization.
  Eigen::VectorXd q_adj;
  double kappa_cr = 0.0;
  /// r minus the modulus of the second eigenvalue, from deflated iteration.
  std::optional<double> spectral_gap;
  bool rescaled = false;
  /// Mortality the rescaled operator was built with (all ones otherwise).
  Eigen::VectorXd mortality;
  long iterations = 0;
  double residual = 0.0;
};

Eigen::VectorXd apply_kernel(const MarkKernel& kernel, const Eigen::VectorXd& h,
                             bool rescaled = false);

/// Power iteration from the all-ones vector with a Rayleigh-quotient stopping
/// rule. Throws ConvergenceError if max_iter is exhausted.
EigenData leading_eigen(const MarkKernel& kernel, bool rescaled = false,
                        const EigenOptions& options = {});

/// Density the first correlation function relaxes to from the product
/// initial data rho * h(s):  rho <h, w> / <q, w>, where w is the left
/// null vector of the critical mark generator (q_adj, divided by the
/// mortality for rescaled eigendata).
double asymptotic_density(const EigenData& eigen, const MarkSpace& space,
                          double rho, const Eigen::VectorXd& h,
                          double normalization_tol = 1e-8);

/// Leading eigenvalue of a named closed-form kernel as the node count grows.
struct KernelRefinementPoint {
  Eigen::Index nodes;
  double r;
};
std::vector<KernelRefinementPoint> kernel_refinement(
    const std::function<MarkKernel(Eigen::Index)>& make_kernel,
    const std::vector<Eigen::Index>& node_counts, bool rescaled = false);

}  // namespace qc
