#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "quasicontact/config.hpp"
#include "quasicontact/hierarchy.hpp"
#include "quasicontact/simulator.hpp"

namespace qc {

enum class Subcommand { Spectrum, Pair, Evolve, Simulate, Validate };

std::optional<Subcommand> parse_subcommand(std::string_view name);
std::string to_string(Subcommand sub);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation_failure = 1;
inline constexpr int config_error = 2;
}  // namespace exit_code

/// Command-line overrides applied on top of a parsed configuration.
struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
};

/// Throws ConfigError (e.g. replicas == 0).
void apply_overrides(RunConfig& config, const Overrides& overrides);

struct DispatchResult {
  int exit_code = exit_code::ok;
  std::filesystem::path directory;
  std::vector<std::string> files;
};

/// Runs one subcommand and writes its artifacts plus manifest.json into a
/// fresh directory <output>/<subcommand>[-N]. Never touches earlier runs.
DispatchResult dispatch(const RunConfig& config, Subcommand sub, std::ostream& log);

struct ClosureCheck {
  std::string name;
  double value;
  double threshold;
  bool passed;
  std::string detail;
};

struct ClosureReport {
  std::vector<ClosureCheck> checks;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// (i) max deviation of k1(t) from rho q over [0, t_end] at criticality.
ClosureCheck check_k1_fixed_point(const CorrelationModel& critical, double rho, double t_end);

/// Decay rate of the slowest non-conserved k1 mode (modulus of the second
/// eigenvalue's real part of the critical mark generator).
double k1_relaxation_rate(const CorrelationModel& critical);

/// (ii, ODE) |sum k1(T) nu - rho_1| with T long enough for 1e-8 accuracy.
ClosureCheck check_density_relaxation_ode(const CorrelationModel& critical, double rho, const Eigen::VectorXd& h);

struct MonteCarloSpec {
  double torus_length;
  double time;
  std::size_t replicas;
  std::uint64_t seed;
};

/// (ii, MC) simulator density at spec.time within 3 standard errors of rho_1.
ClosureCheck check_density_relaxation_mc(const CorrelationModel& critical, double rho, const Eigen::VectorXd& h,
                                         const MonteCarloSpec& spec);

struct PairClosureRow {
  double lo;
  double hi;
  double simulated;
  double stderr_;
  double predicted;
  double grid_tolerance;
  bool passed;
};

struct PairClosure {
  /// Largest |radial per-mode inversion - closed-form quadrature| on the ray.
  double quadrature_error = 0.0;
  std::vector<double> ray;
  std::vector<PairClosureRow> rows;
  double sigma = 1.0;
};

/// Torus prediction for the shell-averaged markless pair correlation,
///   k1^2 + L^-3 [X(0) + sum_{p != 0} X(p) <cos(p.w)>_shell],
/// from an evolved state on a torus-commensurate grid (d = 3, zero mode
/// integrated). `tail` receives the boundary-layer bound on omitted modes.
std::vector<double> shell_averaged_prediction(const K2State& state, std::span<const double> edges,
                                              std::vector<double>* tail = nullptr);

/// (iii) markless critical closure in d = 3 for an isotropic centered
/// gaussian dispersal: radial spectral inversion against direct quadrature
/// of the closed-form transform, then the simulator's pair estimator at
/// spec.time against the evolved torus hierarchy on bins edges * sigma.
PairClosure markless_pair_closure(const DispersalKernel& dispersal, double rho, const MonteCarloSpec& spec,
                                  std::span<const double> edges_in_sigma, int points_per_axis);

/// (iv) criticality-integral refinement for a gaussian of standard deviation
/// sigma in d = 3 (converges) and d = 2 (diverges).
std::vector<ClosureCheck> check_criticality_integral(double sigma, double extent, const std::vector<int>& refinement);

/// (v) pair-distance to the stationary solution at `late` below `tol` and
/// strictly below the distance at `early`.
ClosureCheck check_k2_convergence(const CorrelationModel& critical, double rho, const MomentumGrid& grid,
                                  double early, double late, double tol);

/// Checks (i)-(v) for the configuration's model taken at criticality.
ClosureReport closure_suite(const RunConfig& config, PairClosure* pair_detail = nullptr);

}  // namespace qc
