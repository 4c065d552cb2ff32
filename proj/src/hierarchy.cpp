#include "quasicontact/hierarchy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "quasicontact/errors.hpp"

namespace qc {

namespace {

// Largest dt * ||generator|| accepted; the RK4 region reaches -2.78 on the
// real axis.
constexpr double kStabilityLimit = 2.5;

struct Schedule {
  long steps = 0;
  double dt = 0.0;
  std::vector<long> sample_steps;
};

Schedule make_schedule(double t_end, double dt, std::vector<double> sample_times) {
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ValidationError("t_end must be >= 0");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  Schedule s;
  s.steps = t_end == 0.0 ? 0 : static_cast<long>(std::ceil(t_end / dt - 1e-9));
  s.dt = s.steps == 0 ? dt : t_end / static_cast<double>(s.steps);
  sample_times.push_back(t_end);
  for (double t : sample_times) {
    if (t < 0.0 || t > t_end * (1.0 + 1e-12)) throw ValidationError("sample time outside [0, t_end]");
    s.sample_steps.push_back(std::clamp(std::lround(t / s.dt), 0L, s.steps));
  }
  std::sort(s.sample_steps.begin(), s.sample_steps.end());
  s.sample_steps.erase(std::unique(s.sample_steps.begin(), s.sample_steps.end()), s.sample_steps.end());
  return s;
}

double inf_norm(const Eigen::MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

void check_stability(double dt, double norm, const char* what) {
  if (dt * norm > kStabilityLimit)
    throw StabilityError(std::string(what) + ": dt = " + std::to_string(dt) +
                         " exceeds the RK4 stability bound " + std::to_string(kStabilityLimit / norm));
}

// RK4 stage values of the linear ODE dk/dt = g k started at k.
std::array<Eigen::VectorXd, 4> rk4_stages(const Eigen::MatrixXd& g, const Eigen::VectorXd& k, double dt,
                                          Eigen::VectorXd& next) {
  const Eigen::VectorXd d1 = g * k;
  const Eigen::VectorXd y2 = k + 0.5 * dt * d1;
  const Eigen::VectorXd d2 = g * y2;
  const Eigen::VectorXd y3 = k + 0.5 * dt * d2;
  const Eigen::VectorXd d3 = g * y3;
  const Eigen::VectorXd y4 = k + dt * d3;
  const Eigen::VectorXd d4 = g * y4;
  next = k + dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
  return {k, y2, y3, y4};
}

}  // namespace

double default_time_step(const MarkKernel& kernel, double kappa) {
  return 0.01 / (1.0 + kappa * inf_norm(kernel.operator_matrix(false)));
}

std::vector<K1State> evolve_k1(const MarkKernel& kernel, double kappa, const Eigen::VectorXd& initial,
                               double t_end, double dt, double sample_interval) {
  if (initial.size() != kernel.size()) throw ShapeError("evolve_k1: initial has the wrong length");
  if ((initial.array() < 0.0).any()) throw ValidationError("evolve_k1: initial must be nonnegative");
  if (!(kappa > 0.0)) throw ValidationError("evolve_k1: kappa must be positive");
  Eigen::MatrixXd g = kappa * kernel.operator_matrix(false);
  g.diagonal() -= kernel.mortality();
  check_stability(dt, inf_norm(g), "evolve_k1");

  std::vector<double> times;
  if (sample_interval > 0.0)
    for (double t = 0.0; t < t_end; t += sample_interval) times.push_back(t);
  else
    times.push_back(0.0);
  const Schedule s = make_schedule(t_end, dt, times);

  std::vector<K1State> out;
  Eigen::VectorXd k = initial;
  Eigen::VectorXd next;
  auto sample = s.sample_steps.begin();
  for (long step = 0; step <= s.steps; ++step) {
    if (sample != s.sample_steps.end() && *sample == step) {
      out.push_back({static_cast<double>(step) * s.dt, k});
      ++sample;
    }
    if (step == s.steps) break;
    rk4_stages(g, k, s.dt, next);
    k = next;
  }
  return out;
}

std::vector<K2State> evolve_k2(const CorrelationModel& model, double rho, const MomentumGrid& grid,
                               const K2Options& options) {
  const Eigen::Index k = model.marks();
  const Eigen::Index kk = k * k;
  const Eigen::VectorXd k1_0 = options.k1_initial.value_or(rho * model.eigen.q);
  if (k1_0.size() != k) throw ShapeError("evolve_k2: k1_initial has the wrong length");
  if (options.initial && (options.initial->K() != k ||
                          options.initial->grid.mode_count() != grid.mode_count()))
    throw ShapeError("evolve_k2: initial pair grid does not match");

  const double dt = options.dt > 0.0 ? options.dt : default_time_step(model.kernel, model.kappa);
  const Eigen::MatrixXd g1 = model.k1_generator();
  const double pair_norm = 2.0 * model.kappa * inf_norm(model.weighted_q()) +
                           2.0 * model.kernel.mortality().maxCoeff();
  check_stability(dt, pair_norm, "evolve_k2");
  const Schedule s = make_schedule(options.t_end, dt, options.sample_times);

  // k1 at every RK4 stage of every step
  std::vector<std::array<Eigen::VectorXd, 4>> stages(static_cast<std::size_t>(s.steps));
  std::vector<Eigen::VectorXd> k1_at(static_cast<std::size_t>(s.steps) + 1);
  {
    Eigen::VectorXd y = k1_0;
    Eigen::VectorXd next;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(k, k);
    const Eigen::MatrixXd& g = options.forcing == Forcing::SelfConsistent ? g1 : zero;
    for (long step = 0; step < s.steps; ++step) {
      k1_at[step] = y;
      stages[step] = rk4_stages(g, y, s.dt, next);
      y = next;
    }
    k1_at[s.steps] = y;
  }
  std::vector<double> stage_data(static_cast<std::size_t>(s.steps) * 4 * k);
  for (long step = 0; step < s.steps; ++step)
    for (int st_i = 0; st_i < 4; ++st_i)
      std::copy(stages[step][st_i].data(), stages[step][st_i].data() + k,
                stage_data.begin() + (step * 4 + st_i) * k);

  std::vector<K2State> out;
  for (long step : s.sample_steps) {
    const Eigen::VectorXd& k1 = k1_at[step];
    PairGrid pair{grid, model.kernel.space(), rho, k1 * k1.transpose(), {}};
    pair.values.assign(grid.mode_count() * static_cast<std::size_t>(kk), 0.0);
    out.push_back({static_cast<double>(step) * s.dt, k1, std::move(pair), std::nullopt});
  }

  const auto alpha = char_fn_table(model.dispersal, grid);
  const bool forced = options.forcing != Forcing::None;

  // One mode: X_{n+1} = R X_n + sum_s B_s k1_s, which is classical RK4 for
  // the linear system with forcing Phi k1(t) written out in closed form.
  auto integrate = [&](std::complex<double> a, const std::complex<double>* x0,
                       const std::function<void(std::size_t, const Eigen::VectorXcd&)>& record) {
    const Eigen::MatrixXcd h = s.dt * pair_mode_generator(model, a);
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(kk, kk);
    const Eigen::MatrixXcd r = id + h * (id + h / 2.0 * (id + h / 3.0 * (id + h / 4.0)));
    Eigen::MatrixXcd phi(kk, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(k, c);
      phi.col(c) = pair_mode_forcing(model, a, e);
    }
    const Eigen::MatrixXcd h2 = h * h;
    const double w = s.dt / 6.0;
    const Eigen::MatrixXcd b1 = w * (id + h + h2 / 2.0 + h2 * h / 4.0) * phi;
    const Eigen::MatrixXcd b2 = w * (2.0 * id + h + h2 / 2.0) * phi;
    const Eigen::MatrixXcd b3 = w * (2.0 * id + h) * phi;
    const Eigen::MatrixXcd b4 = w * phi;

    // flattened copies for the inner loop
    std::vector<std::complex<double>> rm(kk * kk);
    std::vector<std::complex<double>> bm(4 * kk * k);
    for (Eigen::Index i = 0; i < kk; ++i) {
      for (Eigen::Index j = 0; j < kk; ++j) rm[i * kk + j] = r(i, j);
      for (Eigen::Index c = 0; c < k; ++c) {
        bm[(0 * kk + i) * k + c] = b1(i, c);
        bm[(1 * kk + i) * k + c] = b2(i, c);
        bm[(2 * kk + i) * k + c] = b3(i, c);
        bm[(3 * kk + i) * k + c] = b4(i, c);
      }
    }
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(kk);
    if (x0) std::copy(x0, x0 + kk, x.data());
    Eigen::VectorXcd next(kk);
    std::size_t sample = 0;
    for (long step = 0; step <= s.steps; ++step) {
      if (sample < s.sample_steps.size() && s.sample_steps[sample] == step) record(sample++, x);
      if (step == s.steps) break;
      const double* st = stage_data.data() + step * 4 * k;
      for (Eigen::Index i = 0; i < kk; ++i) {
        std::complex<double> acc = 0.0;
        const std::complex<double>* row = rm.data() + i * kk;
        for (Eigen::Index j = 0; j < kk; ++j) acc += row[j] * x[j];
        if (forced) {
          for (int st_i = 0; st_i < 4; ++st_i) {
            const std::complex<double>* brow = bm.data() + (st_i * kk + i) * k;
            const double* kv = st + st_i * k;
            for (Eigen::Index c = 0; c < k; ++c) acc += brow[c] * kv[c];
          }
        }
        next[i] = acc;
      }
      x.swap(next);
    }
  };

  const long modes = static_cast<long>(grid.mode_count());
#pragma omp parallel for schedule(static)
  for (long m = 0; m < modes; ++m) {
    const std::complex<double>* x0 =
        options.initial ? options.initial->values.data() + m * kk : nullptr;
    integrate(alpha[m], x0, [&](std::size_t i, const Eigen::VectorXcd& x) {
      std::copy(x.data(), x.data() + kk, out[i].pair.values.begin() + m * kk);
    });
  }
  if (options.zero_mode) {
    integrate({1.0, 0.0}, nullptr, [&](std::size_t i, const Eigen::VectorXcd& x) {
      out[i].zero_mode = Eigen::MatrixXcd(k, k);
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) (*out[i].zero_mode)(a, b) = x[a * k + b];
    });
  }
  return out;
}

std::vector<ConvergencePoint> convergence_report(std::span<const K1State> trajectory,
                                                 const Eigen::VectorXd& target) {
  std::vector<ConvergencePoint> out;
  for (const auto& s : trajectory) {
    if (s.values.size() != target.size()) throw ShapeError("convergence_report: shape mismatch");
    out.push_back({s.time, (s.values - target).cwiseAbs().maxCoeff()});
  }
  return out;
}

double pair_distance(const PairGrid& a, const PairGrid& b) {
  if (a.K() != b.K() || a.grid.mode_count() != b.grid.mode_count() || a.grid.dim() != b.grid.dim() ||
      a.grid.spacing() != b.grid.spacing())
    throw ShapeError("pair_distance: shape mismatch");
  const Eigen::Index k = a.K();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t m = 0; m < a.grid.mode_count(); ++m)
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) sum(i, j) += std::abs(a.at(m, i, j) - b.at(m, i, j));
  const Eigen::MatrixXd total =
      (a.constant_term - b.constant_term).cwiseAbs() + a.grid.inverse_weight() * sum;
  return total.maxCoeff();
}

std::vector<ConvergencePoint> convergence_report(std::span<const K2State> trajectory,
                                                 const PairGrid& target) {
  std::vector<ConvergencePoint> out;
  for (const auto& s : trajectory) out.push_back({s.time, pair_distance(s.pair, target)});
  return out;
}

}  // namespace qc
