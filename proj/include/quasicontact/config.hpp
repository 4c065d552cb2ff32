#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "quasicontact/correlation_model.hpp"
#include "quasicontact/hierarchy.hpp"
#include "json.hpp"

namespace qc {

/// Every problem found in a configuration, each prefixed with its key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct GridSpec {
  double extent = 8.0;
  int points_per_axis = 33;
  /// Spacing 2 pi / L instead of an explicit extent.
  bool torus = false;
  MomentumGrid make(int dim, double torus_length) const;
};

struct SpectrumTask {
  EigenOptions options;
};

struct PairTask {
  double rho = 1.0;
  GridSpec grid;
  std::vector<int> refinement{17, 33, 65};
  std::vector<double> direction;
  std::vector<double> separations;
};

struct EvolveTask {
  double rho = 1.0;
  /// Initial mark profile (normalized, sum h nu = 1); q when absent.
  std::optional<Eigen::VectorXd> h;
  double t_end = 20.0;
  double dt = 0.0;
  double sample_interval = 1.0;
  GridSpec grid;
  Forcing forcing = Forcing::SelfConsistent;
};

struct SimulateTask {
  double rho = 1.0;
  std::optional<Eigen::VectorXd> h;
  double t_end = 5.0;
  std::size_t replicas = 100;
  std::uint64_t seed = 0;
  std::vector<double> sample_times;
  std::vector<double> pair_edges;
};

struct ValidateTask {
  double rho = 1.0;
  std::optional<Eigen::VectorXd> h;
  std::uint64_t seed = 0;
  std::size_t replicas = 500;
  double relax_time = 10.0;
  double fixed_point_time = 50.0;
  double pair_time = 5.0;
  std::size_t pair_replicas = 400;
  /// In units of the dispersal standard deviation.
  std::vector<double> pair_edges{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
  int pair_points_per_axis = 31;
  GridSpec grid;
  std::vector<int> refinement{17, 33, 65};
  double k2_early = 5.0;
  double k2_late = 20.0;
  double k2_tolerance = 1e-3;
};

struct RunConfig {
  explicit RunConfig(CorrelationModel m) : model(std::move(m)) {}

  /// Parsed document, echoed into run manifests.
  nlohmann::json source;
  std::string path;
  int dim = 3;
  double torus_length = 0.0;
  bool kappa_critical = false;
  CorrelationModel model;
  SpectrumTask spectrum;
  PairTask pair;
  EvolveTask evolve;
  SimulateTask simulate;
  ValidateTask validate;
  std::string output_directory = "results";
};

/// Reads and validates a JSON configuration. Relative file references
/// (tabulated dispersal) resolve against the file's directory.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_json(const nlohmann::json& doc, const std::string& base_dir = ".");

}  // namespace qc
