#include "quasicontact/mark_space.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "quasicontact/errors.hpp"

namespace qc {

MarkSpace::MarkSpace(std::vector<std::string> labels, Eigen::VectorXd weights,
                     Eigen::VectorXd coordinates)
    : labels_(std::move(labels)),
      weights_(std::move(weights)),
      coordinates_(std::move(coordinates)) {
  if (weights_.size() < 1) throw ValidationError("mark space needs at least one node");
  if (labels_.empty()) {
    for (Eigen::Index i = 0; i < weights_.size(); ++i) labels_.push_back("s" + std::to_string(i));
  }
  if (static_cast<Eigen::Index>(labels_.size()) != weights_.size())
    throw ShapeError("mark labels and weights differ in length");
  if (coordinates_.size() != 0 && coordinates_.size() != weights_.size())
    throw ShapeError("mark coordinates and weights differ in length");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
      throw ValidationError("mark weight " + std::to_string(i) + " is not strictly positive");
  }
}

MarkSpace MarkSpace::uniform_grid(Eigen::Index count) {
  if (count < 1) throw ValidationError("uniform grid needs at least one node");
  Eigen::VectorXd coords(count);
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < count; ++i) {
    coords[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    std::ostringstream os;
    os << "s" << coords[i];
    labels.push_back(os.str());
  }
  return MarkSpace(std::move(labels),
                   Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count)),
                   std::move(coords));
}

MarkSpace MarkSpace::single() { return MarkSpace({"s0"}, Eigen::VectorXd::Ones(1)); }

double MarkSpace::inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != size() || b.size() != size()) throw ShapeError("inner: length mismatch");
  return (a.array() * b.array() * weights_.array()).sum();
}

MarkKernel::MarkKernel(MarkSpace space, Eigen::MatrixXd q_matrix, Eigen::VectorXd mortality)
    : space_(std::move(space)), q_(std::move(q_matrix)), mortality_(std::move(mortality)) {
  const auto k = space_.size();
  if (q_.rows() != k || q_.cols() != k) throw ShapeError("Q must be K x K");
  if (mortality_.size() == 0) mortality_ = Eigen::VectorXd::Ones(k);
  if (mortality_.size() != k) throw ShapeError("mortality must have length K");
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(q_(i, j) > 0.0) || !std::isfinite(q_(i, j))) {
        throw ValidationError("Q(" + std::to_string(i) + "," + std::to_string(j) +
                              ") is not strictly positive");
      }
    }
    if (!(mortality_[i] > 0.0) || !std::isfinite(mortality_[i]))
      throw ValidationError("mortality " + std::to_string(i) + " is not strictly positive");
  }
}

MarkKernel MarkKernel::uniform(MarkSpace space, double value) {
  const auto k = space.size();
  return MarkKernel(std::move(space), Eigen::MatrixXd::Constant(k, k, value));
}

MarkKernel MarkKernel::exponential(MarkSpace space, double length, double amplitude) {
  if (space.coordinates().size() == 0)
    throw ValidationError("exponential kernel needs mark coordinates");
  if (!(length > 0.0)) throw ValidationError("exponential kernel length must be positive");
  const auto& x = space.coordinates();
  const auto k = space.size();
  Eigen::MatrixXd q(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) q(i, j) = amplitude * std::exp(-std::abs(x[i] - x[j]) / length);
  return MarkKernel(std::move(space), std::move(q));
}

bool MarkKernel::homogeneous_mortality() const {
  return (mortality_.array() == mortality_[0]).all() && mortality_[0] == 1.0;
}

Eigen::MatrixXd MarkKernel::operator_matrix(bool rescaled) const {
  Eigen::MatrixXd a = q_ * space_.weights().asDiagonal();
  if (rescaled) a = mortality_.cwiseInverse().asDiagonal() * a;
  return a;
}

Eigen::MatrixXd MarkKernel::adjoint_matrix(bool rescaled) const {
  Eigen::VectorXd w = space_.weights();
  if (rescaled) w = w.cwiseQuotient(mortality_);
  return q_.transpose() * w.asDiagonal();
}

Eigen::VectorXd apply_kernel(const MarkKernel& kernel, const Eigen::VectorXd& h, bool rescaled) {
  if (h.size() != kernel.size()) throw ShapeError("apply_kernel: h has the wrong length");
  return kernel.operator_matrix(rescaled) * h;
}

namespace {

struct PowerResult {
  double value;
  Eigen::VectorXd vector;
  long iterations;
  double residual;
};

// Dominant eigenpair of a strictly positive matrix; vector normalized by
// sum_i v_i w_i = 1.
PowerResult power_iterate(const Eigen::MatrixXd& a, const Eigen::VectorXd& w,
                          const EigenOptions& options, const char* what) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(a.rows());
  x /= x.dot(w);
  double residual = std::numeric_limits<double>::infinity();
  for (long it = 1; it <= options.max_iter; ++it) {
    const Eigen::VectorXd y = a * x;
    const double lambda = x.dot(y) / x.dot(x);
    residual = (y - lambda * x).cwiseAbs().maxCoeff();
    x = y / y.dot(w);
    if (residual <= options.tol * lambda) {
      // one more product so the returned vector is the freshest iterate
      const Eigen::VectorXd z = a * x;
      const double r = x.dot(z) / x.dot(x);
      return {r, x, it, (z - r * x).cwiseAbs().maxCoeff()};
    }
  }
  throw ConvergenceError(std::string(what) + ": power iteration did not converge", residual);
}

// Modulus of the second eigenvalue from iteration on the deflated matrix.
double second_modulus(const Eigen::MatrixXd& a, double r, const Eigen::VectorXd& right,
                      const Eigen::VectorXd& left) {
  const auto k = a.rows();
  if (k == 1) return 0.0;
  const Eigen::MatrixXd b = a - r * right * left.transpose() / left.dot(right);
  Eigen::VectorXd x(k);
  for (Eigen::Index i = 0; i < k; ++i) x[i] = 1.0 + static_cast<double>(i);
  x -= right * (left.dot(x) / left.dot(right));
  double norm = x.norm();
  if (norm < 1e-300) return 0.0;
  x /= norm;
  constexpr int kSteps = 4000;
  double previous = -1.0;
  double log_growth = 0.0;
  int counted = 0;
  for (int step = 0; step < kSteps; ++step) {
    Eigen::VectorXd y = b * x;
    const double n1 = y.norm();
    if (n1 < 1e-300) return 0.0;
    Eigen::VectorXd z = b * (y / n1);
    const double n2 = z.norm();
    if (n2 < 1e-300) return 0.0;
    const double estimate = std::sqrt(n1 * n2);
    if (step >= kSteps / 2) {
      log_growth += std::log(n1) + std::log(n2);
      counted += 2;
    }
    if (previous > 0.0 && std::abs(estimate - previous) <= 1e-13 * r) return estimate;
    previous = estimate;
    x = z / n2;
  }
  return std::exp(log_growth / counted);
}

}  // namespace

EigenData leading_eigen(const MarkKernel& kernel, bool rescaled, const EigenOptions& options) {
  if (!(options.tol > 0.0)) throw ValidationError("leading_eigen: tol must be positive");
  const Eigen::VectorXd& nu = kernel.space().weights();
  const Eigen::MatrixXd a = kernel.operator_matrix(rescaled);
  const Eigen::MatrixXd adj = kernel.adjoint_matrix(rescaled);
  const PowerResult right = power_iterate(a, nu, options, "leading_eigen");
  const PowerResult left = power_iterate(adj, nu, options, "leading_eigen (adjoint)");

  EigenData out;
  out.r = right.value;
  out.q = right.vector;
  out.q_adj = left.vector;
  out.kappa_cr = 1.0 / out.r;
  out.rescaled = rescaled;
  out.mortality = rescaled ? kernel.mortality() : Eigen::VectorXd::Ones(kernel.size());
  out.iterations = right.iterations;
  out.residual = right.residual;
  // left eigenvector of a in the Euclidean sense is nu .* q_adj
  const Eigen::VectorXd left_vec = nu.cwiseProduct(out.q_adj);
  out.spectral_gap = out.r - second_modulus(a, out.r, out.q, left_vec);
  return out;
}

double asymptotic_density(const EigenData& eigen, const MarkSpace& space, double rho,
                          const Eigen::VectorXd& h, double normalization_tol) {
  if (h.size() != space.size()) throw ShapeError("asymptotic_density: h has the wrong length");
  if ((h.array() < 0.0).any()) throw ValidationError("asymptotic_density: h must be nonnegative");
  const double mass = h.dot(space.weights());
  if (std::abs(mass - 1.0) > normalization_tol)
    throw ValidationError("asymptotic_density: h is not normalized (sum h nu = " +
                          std::to_string(mass) + ")");
  const Eigen::VectorXd w = eigen.q_adj.cwiseQuotient(eigen.mortality);
  return rho * space.inner(h, w) / space.inner(eigen.q, w);
}

std::vector<KernelRefinementPoint> kernel_refinement(
    const std::function<MarkKernel(Eigen::Index)>& make_kernel,
    const std::vector<Eigen::Index>& node_counts, bool rescaled) {
  std::vector<KernelRefinementPoint> out;
  for (auto k : node_counts) out.push_back({k, leading_eigen(make_kernel(k), rescaled).r});
  return out;
}

}  // namespace qc
