#pragma once

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "quasicontact/momentum_grid.hpp"
#include "quasicontact/rng.hpp"

namespace qc {

struct GaussianFamily {
  Eigen::MatrixXd covariance;
  Eigen::VectorXd mean;
};

struct UniformBallFamily {
  double radius;
};

/// Density sampled on a rectilinear grid; values are row-major with the last
/// axis varying fastest.
struct TabulatedFamily {
  std::vector<std::vector<double>> axes;
  std::vector<double> values;
};

/// Spatial birth density alpha on R^d.
class DispersalKernel {
 public:
  static DispersalKernel gaussian(Eigen::MatrixXd covariance, Eigen::VectorXd mean = {});
  static DispersalKernel isotropic_gaussian(int dim, double sigma);
  static DispersalKernel uniform_ball(int dim, double radius);
  static DispersalKernel tabulated(TabulatedFamily table);
  /// CSV rows `u_1,...,u_d,density` (an optional non-numeric header line is
  /// skipped). The rows must cover a full rectilinear grid.
  static DispersalKernel load_tabulated_csv(const std::string& path);

  int dim() const { return dim_; }
  const auto& family() const { return family_; }
  std::string family_name() const;

  double density(std::span<const double> u) const;
  std::complex<double> char_fn(std::span<const double> p) const;
  /// alpha_hat(p) + alpha_hat(-p) = 2 Re alpha_hat(p).
  double symmetrized_char_fn(std::span<const double> p) const { return 2.0 * char_fn(p).real(); }
  void sample_displacement(Rng& rng, std::span<double> out) const;
  std::vector<double> sample_displacement(Rng& rng) const;

  /// Total mass (exactly 1 for closed forms, trapezoidal for tabulated).
  /// Tabulated transforms, moments and samples use the density divided by it.
  double mass() const { return mass_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  /// Square root of the largest covariance eigenvalue.
  double max_std() const;
  bool centered() const { return mean_.cwiseAbs().maxCoeff() == 0.0; }

 private:
  DispersalKernel() = default;
  void finish_tabulated();

  int dim_ = 0;
  std::variant<GaussianFamily, UniformBallFamily, TabulatedFamily> family_;
  double mass_ = 1.0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;

  // gaussian: sampling transform and density normalization
  Eigen::MatrixXd transform_;
  Eigen::MatrixXd precision_;
  double log_norm_ = 0.0;
  bool degenerate_ = false;

  // tabulated: trapezoid weight * density per node, cumulative for sampling
  std::vector<double> node_mass_;
  std::vector<double> cumulative_;
};

struct ValidationCheck {
  std::string name;
  bool passed;
  double value;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed() const;
  const ValidationCheck& check(const std::string& name) const;
};

/// Standing assumptions on alpha: unit mass, finite second moment,
/// non-degenerate covariance, and |alpha_hat(p)| < 1 on the nonzero modes of
/// `grid`. Failures are reported, never thrown.
ValidationReport validate(const DispersalKernel& kernel, const MomentumGrid& grid,
                          double mass_tol = 1e-3);

}  // namespace qc
