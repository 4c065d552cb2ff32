#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "quasicontact/dispersal.hpp"
#include "quasicontact/mark_space.hpp"

namespace qc {

/// Everything the correlation hierarchy at orders 1 and 2 depends on: the
/// mark kernel with mortality, the dispersal density, the branching rate
/// kappa, and the (mortality-rescaled) leading eigendata.
struct CorrelationModel {
  MarkKernel kernel;
  DispersalKernel dispersal;
  double kappa;
  EigenData eigen;

  /// kappa = kappa_cr of the mortality-rescaled operator (which coincides with
  /// the plain operator when m == 1).
  static CorrelationModel critical(MarkKernel kernel, DispersalKernel dispersal,
                                   const EigenOptions& options = {});
  static CorrelationModel with_kappa(MarkKernel kernel, DispersalKernel dispersal, double kappa,
                                     const EigenOptions& options = {});

  Eigen::Index marks() const { return kernel.size(); }
  /// Q diag(nu).
  Eigen::MatrixXd weighted_q() const { return kernel.operator_matrix(false); }
  /// kappa Q diag(nu) - diag(m): generator of the first correlation function.
  Eigen::MatrixXd k1_generator() const;
  bool critical_within(double tol = 1e-9) const { return std::abs(kappa * eigen.r - 1.0) <= tol; }
};

/// alpha_hat on every mode of a grid (p = 0 excluded).
std::vector<std::complex<double>> char_fn_table(const DispersalKernel& dispersal,
                                                const MomentumGrid& grid);

/// Dense K^2 x K^2 matrix of the pair generator at one momentum, acting on
/// vec(X) with index a * K + b:
///   kappa a_hat (Q~ (x) I) + kappa conj(a_hat) (I (x) Q~) - (m_a + m_b),
/// Q~ = Q diag(nu).
Eigen::MatrixXcd pair_mode_generator(const CorrelationModel& model, std::complex<double> alpha_hat);

/// Fourier transform of the pair forcing at one momentum for a given first
/// correlation function k1: kappa [a_hat Q_ab k1_b + conj(a_hat) Q_ba k1_a],
/// returned as vec with index a * K + b.
Eigen::VectorXcd pair_mode_forcing(const CorrelationModel& model, std::complex<double> alpha_hat,
                                   const Eigen::VectorXd& k1);

}  // namespace qc
