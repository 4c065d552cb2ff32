#include "quasicontact/correlation_model.hpp"

#include "quasicontact/errors.hpp"

namespace qc {

CorrelationModel CorrelationModel::critical(MarkKernel kernel, DispersalKernel dispersal,
                                            const EigenOptions& options) {
  EigenData eigen = leading_eigen(kernel, true, options);
  const double kappa = eigen.kappa_cr;
  return {std::move(kernel), std::move(dispersal), kappa, std::move(eigen)};
}

CorrelationModel CorrelationModel::with_kappa(MarkKernel kernel, DispersalKernel dispersal,
                                              double kappa, const EigenOptions& options) {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  EigenData eigen = leading_eigen(kernel, true, options);
  return {std::move(kernel), std::move(dispersal), kappa, std::move(eigen)};
}

Eigen::MatrixXd CorrelationModel::k1_generator() const {
  Eigen::MatrixXd g = kappa * weighted_q();
  g.diagonal() -= kernel.mortality();
  return g;
}

std::vector<std::complex<double>> char_fn_table(const DispersalKernel& dispersal,
                                                const MomentumGrid& grid) {
  if (grid.dim() != dispersal.dim()) throw ShapeError("grid and dispersal dimensions differ");
  std::vector<std::complex<double>> out(grid.mode_count());
  std::vector<double> p(grid.dim());
  // alpha is real, so alpha_hat(-p) = conj(alpha_hat(p)); fill the negated half
  const std::size_t half = grid.mode_count() / 2;
  for (std::size_t m = 0; m < half; ++m) {
    grid.mode(m, p);
    out[m] = dispersal.char_fn(p);
    out[grid.negated(m)] = std::conj(out[m]);
  }
  return out;
}

Eigen::MatrixXcd pair_mode_generator(const CorrelationModel& model, std::complex<double> alpha_hat) {
  const Eigen::Index k = model.marks();
  const Eigen::MatrixXd qt = model.weighted_q();
  const Eigen::VectorXd& m = model.kernel.mortality();
  const std::complex<double> left = model.kappa * alpha_hat;
  const std::complex<double> right = model.kappa * std::conj(alpha_hat);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(k * k, k * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index row = i * k + j;
      a(row, row) -= m[i] + m[j];
      for (Eigen::Index c = 0; c < k; ++c) {
        a(row, c * k + j) += left * qt(i, c);
        a(row, i * k + c) += right * qt(j, c);
      }
    }
  }
  return a;
}

Eigen::VectorXcd pair_mode_forcing(const CorrelationModel& model, std::complex<double> alpha_hat,
                                   const Eigen::VectorXd& k1) {
  const Eigen::Index k = model.marks();
  if (k1.size() != k) throw ShapeError("pair forcing: k1 has the wrong length");
  const Eigen::MatrixXd& q = model.kernel.q_matrix();
  Eigen::VectorXcd f(k * k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      f[a * k + b] = model.kappa * (alpha_hat * q(a, b) * k1[b] + std::conj(alpha_hat) * q(b, a) * k1[a]);
  return f;
}

}  // namespace qc
