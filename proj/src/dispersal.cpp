#include "quasicontact/dispersal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "quasicontact/errors.hpp"

namespace qc {

namespace {

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// Characteristic function of the uniform law on the unit ball at radius x.
double ball_char_fn(int d, double x) {
  if (x < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / (2.0 * (d + 2)) + x2 * x2 / (8.0 * (d + 2) * (d + 4));
  }
  switch (d) {
    case 1:
      return std::sin(x) / x;
    case 3:
      return 3.0 * (std::sin(x) - x * std::cos(x)) / (x * x * x);
    default: {
      const double nu = 0.5 * d;
      return std::tgamma(nu + 1.0) * std::pow(2.0 / x, nu) * std::cyl_bessel_j(nu, x);
    }
  }
}

std::vector<double> trapezoid_weights(const std::vector<double>& axis) {
  const std::size_t n = axis.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double h = axis[j + 1] - axis[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite input");
}

}  // namespace

DispersalKernel DispersalKernel::gaussian(Eigen::MatrixXd covariance, Eigen::VectorXd mean) {
  const auto d = covariance.rows();
  if (d < 1 || covariance.cols() != d) throw ShapeError("gaussian: covariance must be square");
  if (mean.size() == 0) mean = Eigen::VectorXd::Zero(d);
  if (mean.size() != d) throw ShapeError("gaussian: mean has the wrong length");
  if (!covariance.isApprox(covariance.transpose()))
    throw ValidationError("gaussian: covariance must be symmetric");

  DispersalKernel k;
  k.dim_ = static_cast<int>(d);
  k.mean_ = mean;
  k.covariance_ = covariance;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-12 * std::max(1.0, ev.maxCoeff()))
    throw ValidationError("gaussian: covariance is not positive semidefinite");
  k.transform_ = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  k.degenerate_ = ev.minCoeff() <= 1e-14 * std::max(1.0, ev.maxCoeff());
  if (!k.degenerate_) {
    k.precision_ = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
    k.log_norm_ = -0.5 * (d * std::log(2.0 * std::numbers::pi) + ev.array().log().sum());
  }
  k.family_ = GaussianFamily{std::move(covariance), std::move(mean)};
  return k;
}

DispersalKernel DispersalKernel::isotropic_gaussian(int dim, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian: sigma must be positive");
  return gaussian(Eigen::MatrixXd::Identity(dim, dim) * sigma * sigma);
}

DispersalKernel DispersalKernel::uniform_ball(int dim, double radius) {
  if (dim < 1) throw ValidationError("uniform ball: dim must be >= 1");
  if (!(radius > 0.0)) throw ValidationError("uniform ball: radius must be positive");
  DispersalKernel k;
  k.dim_ = dim;
  k.family_ = UniformBallFamily{radius};
  k.mean_ = Eigen::VectorXd::Zero(dim);
  k.covariance_ = Eigen::MatrixXd::Identity(dim, dim) * radius * radius / (dim + 2.0);
  return k;
}

DispersalKernel DispersalKernel::tabulated(TabulatedFamily table) {
  const int d = static_cast<int>(table.axes.size());
  if (d < 1) throw ShapeError("tabulated: need at least one axis");
  std::size_t total = 1;
  for (const auto& axis : table.axes) {
    if (axis.size() < 2) throw ShapeError("tabulated: every axis needs at least two points");
    for (std::size_t j = 1; j < axis.size(); ++j)
      if (!(axis[j] > axis[j - 1])) throw ValidationError("tabulated: axis not strictly increasing");
    total *= axis.size();
  }
  if (table.values.size() != total) throw ShapeError("tabulated: value count does not match grid");
  for (double v : table.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("tabulated: density must be nonnegative");

  DispersalKernel k;
  k.dim_ = d;
  k.family_ = std::move(table);
  k.finish_tabulated();
  return k;
}

void DispersalKernel::finish_tabulated() {
  const auto& t = std::get<TabulatedFamily>(family_);
  std::vector<std::vector<double>> weights;
  for (const auto& axis : t.axes) weights.push_back(trapezoid_weights(axis));

  const std::size_t total = t.values.size();
  node_mass_.assign(total, 0.0);
  cumulative_.assign(total, 0.0);
  Eigen::VectorXd first = Eigen::VectorXd::Zero(dim_);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(dim_, dim_);
  std::vector<std::size_t> idx(dim_, 0);
  Eigen::VectorXd u(dim_);
  double running = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    double w = 1.0;
    for (int a = 0; a < dim_; ++a) {
      w *= weights[a][idx[a]];
      u[a] = t.axes[a][idx[a]];
    }
    const double m = w * t.values[flat];
    node_mass_[flat] = m;
    running += m;
    cumulative_[flat] = running;
    first += m * u;
    second += m * u * u.transpose();
    for (int a = dim_ - 1; a >= 0; --a) {
      if (++idx[a] < t.axes[a].size()) break;
      idx[a] = 0;
    }
  }
  if (!(running > 0.0)) throw ValidationError("tabulated: density has zero mass");
  // moments, transform and sampling use the unit-mass renormalization; the
  // raw mass is kept for validation
  mass_ = running;
  mean_ = first / running;
  covariance_ = second / running - mean_ * mean_.transpose();
}

DispersalKernel DispersalKernel::load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("tabulated: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw ValidationError(path + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError(path + ":" + std::to_string(line_no) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 2) throw ShapeError("tabulated: " + path + " has no data");
  const int d = static_cast<int>(rows.front().size()) - 1;

  TabulatedFamily table;
  table.axes.resize(d);
  for (int a = 0; a < d; ++a) {
    std::vector<double> coords;
    for (const auto& r : rows) coords.push_back(r[a]);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    table.axes[a] = std::move(coords);
  }
  std::size_t total = 1;
  for (const auto& axis : table.axes) total *= axis.size();
  if (total != rows.size()) throw ShapeError("tabulated: rows do not form a full rectilinear grid");
  table.values.assign(total, -1.0);
  for (const auto& r : rows) {
    std::size_t flat = 0;
    for (int a = 0; a < d; ++a) {
      const auto& axis = table.axes[a];
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(axis.begin(), axis.end(), r[a]) - axis.begin());
      flat = flat * axis.size() + pos;
    }
    if (table.values[flat] >= 0.0) throw ShapeError("tabulated: duplicate grid point");
    table.values[flat] = r[d];
  }
  return tabulated(std::move(table));
}

std::string DispersalKernel::family_name() const {
  switch (family_.index()) {
    case 0:
      return "gaussian";
    case 1:
      return "uniform_ball";
    default:
      return "tabulated";
  }
}

double DispersalKernel::max_std() const {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance_, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double DispersalKernel::density(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != dim_) throw ShapeError("density: wrong dimension");
  require_finite(u, "density");
  if (const auto* g = std::get_if<GaussianFamily>(&family_)) {
    // a singular covariance has no Lebesgue density
    if (degenerate_) return 0.0;
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(u.data(), dim_) - g->mean;
    return std::exp(log_norm_ - 0.5 * x.dot(precision_ * x));
  }
  if (const auto* b = std::get_if<UniformBallFamily>(&family_)) {
    double r2 = 0.0;
    for (double x : u) r2 += x * x;
    if (r2 > b->radius * b->radius) return 0.0;
    return 1.0 / (unit_ball_volume(dim_) * std::pow(b->radius, dim_));
  }
  // multilinear interpolation
  const auto& t = std::get<TabulatedFamily>(family_);
  std::vector<std::size_t> lo(dim_);
  std::vector<double> frac(dim_);
  for (int a = 0; a < dim_; ++a) {
    const auto& axis = t.axes[a];
    if (u[a] < axis.front() || u[a] > axis.back()) return 0.0;
    auto it = std::upper_bound(axis.begin(), axis.end(), u[a]);
    std::size_t j = static_cast<std::size_t>(it - axis.begin());
    j = std::clamp<std::size_t>(j, 1, axis.size() - 1) - 1;
    lo[a] = j;
    frac[a] = (u[a] - axis[j]) / (axis[j + 1] - axis[j]);
  }
  double value = 0.0;
  for (unsigned corner = 0; corner < (1u << dim_); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) {
      const bool up = (corner >> a) & 1u;
      w *= up ? frac[a] : 1.0 - frac[a];
      flat = flat * t.axes[a].size() + lo[a] + (up ? 1 : 0);
    }
    if (w != 0.0) value += w * t.values[flat];
  }
  return value;
}

std::complex<double> DispersalKernel::char_fn(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dim_) throw ShapeError("char_fn: wrong dimension");
  require_finite(p, "char_fn");
  if (const auto* g = std::get_if<GaussianFamily>(&family_)) {
    const Eigen::Map<const Eigen::VectorXd> pv(p.data(), dim_);
    const double quad = pv.dot(g->covariance * pv);
    const double phase = pv.dot(g->mean);
    if (phase == 0.0) return {std::exp(-0.5 * quad), 0.0};
    return std::polar(std::exp(-0.5 * quad), phase);
  }
  if (const auto* b = std::get_if<UniformBallFamily>(&family_)) {
    double p2 = 0.0;
    for (double x : p) p2 += x * x;
    return {ball_char_fn(dim_, std::sqrt(p2) * b->radius), 0.0};
  }
  // trapezoidal quadrature; phases are separable per axis
  const auto& t = std::get<TabulatedFamily>(family_);
  std::vector<std::vector<std::complex<double>>> phase(dim_);
  for (int a = 0; a < dim_; ++a)
    for (double x : t.axes[a]) phase[a].push_back(std::polar(1.0, p[a] * x));
  std::vector<std::size_t> idx(dim_, 0);
  std::complex<double> sum = 0.0;
  for (std::size_t flat = 0; flat < node_mass_.size(); ++flat) {
    if (node_mass_[flat] != 0.0) {
      std::complex<double> e = phase[0][idx[0]];
      for (int a = 1; a < dim_; ++a) e *= phase[a][idx[a]];
      sum += node_mass_[flat] * e;
    }
    for (int a = dim_ - 1; a >= 0; --a) {
      if (++idx[a] < t.axes[a].size()) break;
      idx[a] = 0;
    }
  }
  return sum / mass_;
}

void DispersalKernel::sample_displacement(Rng& rng, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim_) throw ShapeError("sample_displacement: wrong dimension");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  if (const auto* g = std::get_if<GaussianFamily>(&family_)) {
    Eigen::VectorXd z(dim_);
    for (int a = 0; a < dim_; ++a) z[a] = normal(rng);
    const Eigen::VectorXd x = g->mean + transform_ * z;
    for (int a = 0; a < dim_; ++a) out[a] = x[a];
    return;
  }
  if (const auto* b = std::get_if<UniformBallFamily>(&family_)) {
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (int a = 0; a < dim_; ++a) {
        out[a] = normal(rng);
        n2 += out[a] * out[a];
      }
    } while (n2 == 0.0);
    const double radius = b->radius * std::pow(uniform(rng), 1.0 / dim_);
    const double scale = radius / std::sqrt(n2);
    for (int a = 0; a < dim_; ++a) out[a] *= scale;
    return;
  }
  // node by trapezoid mass, then uniform over the node's dual cell
  const auto& t = std::get<TabulatedFamily>(family_);
  const double target = uniform(rng) * cumulative_.back();
  std::size_t flat = static_cast<std::size_t>(
      std::upper_bound(cumulative_.begin(), cumulative_.end(), target) - cumulative_.begin());
  flat = std::min(flat, cumulative_.size() - 1);
  for (int a = dim_ - 1; a >= 0; --a) {
    const auto& axis = t.axes[a];
    const std::size_t j = flat % axis.size();
    flat /= axis.size();
    const double lo = j == 0 ? axis[0] : 0.5 * (axis[j - 1] + axis[j]);
    const double hi = j + 1 == axis.size() ? axis[j] : 0.5 * (axis[j] + axis[j + 1]);
    out[a] = lo + (hi - lo) * uniform(rng);
  }
}

std::vector<double> DispersalKernel::sample_displacement(Rng& rng) const {
  std::vector<double> out(dim_);
  sample_displacement(rng, out);
  return out;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck& ValidationReport::check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no validation check named " + name);
}

ValidationReport validate(const DispersalKernel& kernel, const MomentumGrid& grid, double mass_tol) {
  ValidationReport report;
  const double mass = kernel.mass();
  report.checks.push_back({"mass", std::abs(mass - 1.0) <= mass_tol, mass,
                           "integral of alpha must be 1"});

  const double second = kernel.covariance().trace() + kernel.mean().squaredNorm();
  report.checks.push_back({"second_moment", std::isfinite(second), second,
                           "integral of |u|^2 alpha must be finite"});

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel.covariance(),
                                                           Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  report.checks.push_back({"covariance", lmax > 0.0 && lmin > 1e-10 * lmax, lmin,
                           "covariance matrix must be non-degenerate"});

  double max_abs = 0.0;
  if (grid.dim() == kernel.dim()) {
    std::vector<double> p(grid.dim());
    for (std::size_t m = 0; m < grid.mode_count(); ++m) {
      grid.mode(m, p);
      max_abs = std::max(max_abs, std::abs(kernel.char_fn(p)));
    }
    report.checks.push_back({"char_fn_bound", max_abs < 1.0, max_abs,
                             "|alpha_hat(p)| < 1 for p != 0"});
  } else {
    report.checks.push_back({"char_fn_bound", false, std::nan(""),
                             "grid dimension differs from kernel dimension"});
  }
  return report;
}

}  // namespace qc
