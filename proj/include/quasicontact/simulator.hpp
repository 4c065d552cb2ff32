#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "quasicontact/dispersal.hpp"
#include "quasicontact/mark_space.hpp"
#include "quasicontact/rng.hpp"

namespace qc {

/// Marked particles on the torus [0, L)^d. Particles are bucketed by mark;
/// order inside a bucket carries no meaning.
class Configuration {
 public:
  Configuration(int dim, double torus_length, Eigen::Index marks);

  int dim() const { return dim_; }
  double torus_length() const { return length_; }
  double volume() const;
  Eigen::Index marks() const { return static_cast<Eigen::Index>(buckets_.size()); }
  double time = 0.0;

  std::size_t size() const { return total_; }
  bool empty() const { return total_ == 0; }
  std::size_t count(Eigen::Index mark) const { return buckets_[mark].size() / dim_; }
  std::span<const double> position(Eigen::Index mark, std::size_t i) const {
    return {buckets_[mark].data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  /// Flattened positions of every particle of one mark.
  const std::vector<double>& bucket(Eigen::Index mark) const { return buckets_[mark]; }

  /// Adds a particle, wrapping its position into [0, L).
  void add(Eigen::Index mark, std::span<const double> position);
  void remove(Eigen::Index mark, std::size_t i);

 private:
  int dim_;
  double length_;
  std::vector<std::vector<double>> buckets_;
  std::size_t total_ = 0;
};

/// Per-parent-mark offspring production, with alpha integrated out.
struct BirthRateTable {
  /// beta_i = sum_j Q(s_j, s_i) nu_j.
  Eigen::VectorXd beta;
  /// Child-mark law for each parent mark, weights Q(s_child, s_parent) nu_child.
  std::vector<std::discrete_distribution<int>> offspring;
  std::vector<std::vector<double>> offspring_weights;
};

BirthRateTable build_rate_table(const MarkKernel& kernel);

struct SimParams {
  MarkKernel kernel;
  DispersalKernel dispersal;
  double kappa;
  double torus_length;
  double t_end;
  std::uint64_t seed = 0;
  std::size_t replicas = 1;

  /// Throws ValidationError on kappa < 0, replicas == 0
  /// or L < 8 * (largest dispersal standard deviation).
  void validate() const;
};

enum class EventKind { Birth, Death, Absorbed };

struct EventRecord {
  EventKind kind;
  double time;
  /// Mark of the child (birth) or of the removed particle (death).
  Eigen::Index mark = -1;
  Eigen::Index parent_mark = -1;
};

/// One Gillespie event: exponential waiting time at total rate
/// sum m(s_y) + kappa sum beta(s_y), then a death or a birth chosen by rate.
/// The event time may exceed any horizon; callers compare it themselves.
/// An empty configuration is absorbing and returns EventKind::Absorbed.
EventRecord step(Configuration& config, const SimParams& params, const BirthRateTable& table, Rng& rng);

/// Marked Poisson field whose mark-i particles have density rho h_i nu_i, so
/// that the first correlation function is rho h.
struct PoissonSpec {
  double rho;
  Eigen::VectorXd h;
};

Configuration sample_poisson(const SimParams& params, const PoissonSpec& spec, Rng& rng);

struct Observation {
  double time;
  std::vector<std::size_t> counts;
  std::size_t total() const;
};

struct ObservationLog {
  std::size_t replica = 0;
  std::vector<Observation> samples;
  /// Configurations at the sample times, when requested.
  std::vector<Configuration> snapshots;
  std::size_t initial_count = 0;
  std::size_t births = 0;
  std::size_t deaths = 0;
  bool extinct = false;
  double extinction_time = 0.0;
};

struct RunOptions {
  std::vector<double> sample_times;
  bool keep_snapshots = false;
  /// Called with every event that happens before t_end.
  std::function<void(const EventRecord&, const Configuration&)> on_event;
};

using InitialCondition = std::variant<Configuration, PoissonSpec>;

/// Runs replica `replica` of `params` to t_end (or extinction) using the
/// stream derived from (seed, replica).
ObservationLog run(const SimParams& params, const BirthRateTable& table, const InitialCondition& initial,
                   const RunOptions& options, std::size_t replica);

/// All params.replicas replicas; the result is ordered by replica index and
/// independent of thread scheduling.
std::vector<ObservationLog> run_replicas(const SimParams& params, const InitialCondition& initial,
                                         const RunOptions& options);

struct Estimate {
  double value;
  double stderr_;
};

/// Axis-aligned window [lo, hi) inside the torus; empty bounds mean the
/// whole torus.
struct Window {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// N(V) / V averaged over replica snapshots with a replica standard error.
Estimate estimate_density(std::span<const Configuration> snapshots, const Window& window = {});
/// Whole-torus density from the logged counts at sample index `sample`.
Estimate estimate_density(std::span<const ObservationLog> logs, std::size_t sample, double volume);

/// Per-mark densities (count of mark i) / L^d, comparable to rho q_i nu_i.
/// Throws EmptySampleError when every snapshot is empty.
std::vector<Estimate> estimate_mark_histogram(std::span<const Configuration> snapshots);

struct PairCorrelationTable {
  std::vector<double> edges;
  Eigen::Index marks = 0;
  /// [bin][a][b]; nullopt marks a bin with no pairs in any replica.
  std::vector<std::optional<double>> value;
  std::vector<double> stderr_;
  std::vector<std::size_t> pair_counts;

  std::size_t bins() const { return edges.size() - 1; }
  std::size_t index(std::size_t bin, Eigen::Index a, Eigen::Index b) const {
    return (bin * marks + a) * marks + b;
  }
};

/// Volume of the shell a <= |w| < b in R^d.
double shell_volume(int dim, double a, double b);

/// Ordered-pair counting estimator of k2(w; a, b) on the torus: pairs with
/// minimum-image separation in each shell, divided by L^d, the shell volume
/// and nu_a nu_b. Averaged over snapshots. Bin edges must lie in [0, L/2].
PairCorrelationTable estimate_pair_correlation(std::span<const Configuration> snapshots,
                                               std::span<const double> edges,
                                               const Eigen::VectorXd& mark_weights);

}  // namespace qc
