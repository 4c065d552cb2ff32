#include "quasicontact/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "quasicontact/errors.hpp"

namespace qc {

namespace {

double wrap(double x, double length) {
  double y = std::fmod(x, length);
  if (y < 0.0) y += length;
  // fmod of a tiny negative number can round up to exactly `length`
  return y >= length ? 0.0 : y;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

Estimate summarize(const std::vector<double>& xs) { return {mean_of(xs), stderr_of(xs)}; }

double total_rate(const Configuration& config, const SimParams& params, const BirthRateTable& table,
                  std::vector<double>& per_mark) {
  const auto& m = params.kernel.mortality();
  double total = 0.0;
  for (Eigen::Index k = 0; k < config.marks(); ++k) {
    per_mark[k] = static_cast<double>(config.count(k)) * (m[k] + params.kappa * table.beta[k]);
    total += per_mark[k];
  }
  return total;
}

using OffspringLaws = std::vector<std::discrete_distribution<int>>;

EventRecord apply_event(Configuration& config, const SimParams& params, const BirthRateTable& table,
                        OffspringLaws& offspring, const std::vector<double>& per_mark, double total,
                        double time, Rng& rng) {
  std::uniform_real_distribution<double> uniform;
  double u = uniform(rng) * total;
  Eigen::Index mark = 0;
  const Eigen::Index last = config.marks() - 1;
  while (mark < last && u >= per_mark[mark]) {
    u -= per_mark[mark];
    ++mark;
  }
  while (config.count(mark) == 0) --mark;  // round-off guard

  const std::size_t n = config.count(mark);
  const std::size_t who = std::min<std::size_t>(static_cast<std::size_t>(uniform(rng) * n), n - 1);
  const double death = params.kernel.mortality()[mark];
  const double birth = params.kappa * table.beta[mark];
  config.time = time;
  if (uniform(rng) * (death + birth) < death) {
    config.remove(mark, who);
    return {EventKind::Death, time, mark, -1};
  }
  const Eigen::Index child = offspring[mark](rng);
  std::vector<double> pos(config.dim());
  params.dispersal.sample_displacement(rng, pos);
  const auto parent = config.position(mark, who);
  for (int a = 0; a < config.dim(); ++a) pos[a] += parent[a];
  config.add(child, pos);
  return {EventKind::Birth, time, child, mark};
}

Observation observe(const Configuration& config, double time) {
  Observation obs{time, std::vector<std::size_t>(config.marks())};
  for (Eigen::Index k = 0; k < config.marks(); ++k) obs.counts[k] = config.count(k);
  return obs;
}

}  // namespace

Configuration::Configuration(int dim, double torus_length, Eigen::Index marks)
    : dim_(dim), length_(torus_length), buckets_(marks) {
  if (dim < 1) throw ShapeError("Configuration: dimension must be at least 1");
  if (!(torus_length > 0.0)) throw ValidationError("Configuration: torus length must be positive");
  if (marks < 1) throw ShapeError("Configuration: need at least one mark");
}

double Configuration::volume() const { return std::pow(length_, dim_); }

void Configuration::add(Eigen::Index mark, std::span<const double> position) {
  if (static_cast<int>(position.size()) != dim_) throw ShapeError("Configuration::add: wrong dimension");
  auto& b = buckets_.at(mark);
  for (double x : position) b.push_back(wrap(x, length_));
  ++total_;
}

void Configuration::remove(Eigen::Index mark, std::size_t i) {
  auto& b = buckets_.at(mark);
  const std::size_t n = b.size() / dim_;
  if (i >= n) throw std::out_of_range("Configuration::remove: index out of range");
  std::copy(b.end() - dim_, b.end(), b.begin() + i * dim_);
  b.resize(b.size() - dim_);
  --total_;
}

BirthRateTable build_rate_table(const MarkKernel& kernel) {
  const auto& q = kernel.q_matrix();
  const auto& nu = kernel.space().weights();
  BirthRateTable table;
  table.beta = q.transpose() * nu;
  for (Eigen::Index j = 0; j < kernel.size(); ++j) {
    std::vector<double> w(kernel.size());
    for (Eigen::Index i = 0; i < kernel.size(); ++i) w[i] = q(i, j) * nu[i];
    table.offspring.emplace_back(w.begin(), w.end());
    table.offspring_weights.push_back(std::move(w));
  }
  return table;
}

void SimParams::validate() const {
  if (!(kappa >= 0.0)) throw ValidationError("simulate: kappa must be non-negative");
  if (replicas == 0) throw ValidationError("simulate: replicas must be at least 1");
  if (!(t_end >= 0.0)) throw ValidationError("simulate: t_end must be non-negative");
  if (!(torus_length > 0.0)) throw ValidationError("simulate: torus length must be positive");
  const double spread = dispersal.max_std();
  if (torus_length < 8.0 * spread)
    throw ValidationError("simulate: torus length " + std::to_string(torus_length) +
                          " is below 8 x the dispersal standard deviation " + std::to_string(spread));
  if ((kernel.q_matrix().transpose() * kernel.space().weights()).minCoeff() <= 0.0)
    throw ValidationError("simulate: some mark has zero offspring rate");
}

EventRecord step(Configuration& config, const SimParams& params, const BirthRateTable& table, Rng& rng) {
  if (config.empty()) return {EventKind::Absorbed, config.time};
  std::vector<double> per_mark(config.marks());
  const double total = total_rate(config, params, table, per_mark);
  std::exponential_distribution<double> wait(total);
  OffspringLaws offspring = table.offspring;
  return apply_event(config, params, table, offspring, per_mark, total, config.time + wait(rng), rng);
}

Configuration sample_poisson(const SimParams& params, const PoissonSpec& spec, Rng& rng) {
  const auto& nu = params.kernel.space().weights();
  if (spec.h.size() != nu.size()) throw ShapeError("sample_poisson: h has the wrong length");
  if (!(spec.rho >= 0.0) || spec.h.minCoeff() < 0.0)
    throw ValidationError("sample_poisson: intensity must be non-negative");
  const int d = params.dispersal.dim();
  Configuration config(d, params.torus_length, nu.size());
  std::uniform_real_distribution<double> uniform(0.0, params.torus_length);
  std::vector<double> pos(d);
  for (Eigen::Index k = 0; k < nu.size(); ++k) {
    const double mean = spec.rho * spec.h[k] * nu[k] * config.volume();
    if (mean == 0.0) continue;
    std::poisson_distribution<long> count(mean);
    for (long i = count(rng); i > 0; --i) {
      for (auto& x : pos) x = uniform(rng);
      config.add(k, pos);
    }
  }
  return config;
}

std::size_t Observation::total() const {
  std::size_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

ObservationLog run(const SimParams& params, const BirthRateTable& table, const InitialCondition& initial,
                   const RunOptions& options, std::size_t replica) {
  Rng rng = make_stream(params.seed, replica);
  Configuration config = std::holds_alternative<Configuration>(initial)
                             ? std::get<Configuration>(initial)
                             : sample_poisson(params, std::get<PoissonSpec>(initial), rng);
  config.time = 0.0;

  std::vector<double> times = options.sample_times;
  std::sort(times.begin(), times.end());
  times.erase(std::remove_if(times.begin(), times.end(), [&](double t) { return t > params.t_end; }),
              times.end());

  ObservationLog log;
  log.replica = replica;
  log.initial_count = config.size();
  std::size_t next_sample = 0;
  auto record_until = [&](double t) {
    while (next_sample < times.size() && times[next_sample] <= t) {
      log.samples.push_back(observe(config, times[next_sample]));
      if (options.keep_snapshots) {
        log.snapshots.push_back(config);
        log.snapshots.back().time = times[next_sample];
      }
      ++next_sample;
    }
  };

  std::vector<double> per_mark(config.marks());
  OffspringLaws offspring = table.offspring;
  double t = 0.0;
  while (true) {
    if (config.empty()) {
      log.extinct = true;
      log.extinction_time = t;
      record_until(std::numeric_limits<double>::infinity());
      break;
    }
    const double total = total_rate(config, params, table, per_mark);
    std::exponential_distribution<double> wait(total);
    const double next = t + wait(rng);
    // the state is constant on [t, next): samples before next see it
    record_until(std::nextafter(next, 0.0));
    if (next > params.t_end) {
      record_until(params.t_end);
      break;
    }
    const EventRecord ev = apply_event(config, params, table, offspring, per_mark, total, next, rng);
    t = next;
    if (ev.kind == EventKind::Birth) ++log.births;
    else ++log.deaths;
    if (options.on_event) options.on_event(ev, config);
  }
  return log;
}

std::vector<ObservationLog> run_replicas(const SimParams& params, const InitialCondition& initial,
                                         const RunOptions& options) {
  params.validate();
  if (const auto* c = std::get_if<Configuration>(&initial)) {
    if (c->dim() != params.dispersal.dim() || c->marks() != params.kernel.size())
      throw ShapeError("run_replicas: initial configuration does not match the model");
  }
  const BirthRateTable table = build_rate_table(params.kernel);
  std::vector<ObservationLog> out(params.replicas);
  const long n = static_cast<long>(params.replicas);
#pragma omp parallel for schedule(dynamic) if (!options.on_event)
  for (long r = 0; r < n; ++r) out[r] = run(params, table, initial, options, static_cast<std::size_t>(r));
  return out;
}

Estimate estimate_density(std::span<const Configuration> snapshots, const Window& window) {
  if (snapshots.empty()) throw EmptySampleError("estimate_density: no snapshots");
  std::vector<double> values;
  for (const auto& c : snapshots) {
    if (window.lo.empty()) {
      values.push_back(static_cast<double>(c.size()) / c.volume());
      continue;
    }
    const int d = c.dim();
    if (static_cast<int>(window.lo.size()) != d || static_cast<int>(window.hi.size()) != d)
      throw ShapeError("estimate_density: window has the wrong dimension");
    double vol = 1.0;
    for (int a = 0; a < d; ++a) {
      if (!(window.hi[a] > window.lo[a]) || window.lo[a] < 0.0 || window.hi[a] > c.torus_length())
        throw ValidationError("estimate_density: window must lie inside the torus");
      vol *= window.hi[a] - window.lo[a];
    }
    std::size_t inside = 0;
    for (Eigen::Index k = 0; k < c.marks(); ++k) {
      const auto& b = c.bucket(k);
      for (std::size_t i = 0; i < b.size(); i += d) {
        bool in = true;
        for (int a = 0; a < d && in; ++a) in = b[i + a] >= window.lo[a] && b[i + a] < window.hi[a];
        inside += in;
      }
    }
    values.push_back(static_cast<double>(inside) / vol);
  }
  return summarize(values);
}

Estimate estimate_density(std::span<const ObservationLog> logs, std::size_t sample, double volume) {
  if (logs.empty()) throw EmptySampleError("estimate_density: no replicas");
  std::vector<double> values;
  for (const auto& log : logs) values.push_back(static_cast<double>(log.samples.at(sample).total()) / volume);
  return summarize(values);
}

std::vector<Estimate> estimate_mark_histogram(std::span<const Configuration> snapshots) {
  if (snapshots.empty() ||
      std::all_of(snapshots.begin(), snapshots.end(), [](const auto& c) { return c.empty(); }))
    throw EmptySampleError("estimate_mark_histogram: no particles in any snapshot");
  const Eigen::Index k = snapshots.front().marks();
  std::vector<Estimate> out;
  for (Eigen::Index m = 0; m < k; ++m) {
    std::vector<double> values;
    for (const auto& c : snapshots) values.push_back(static_cast<double>(c.count(m)) / c.volume());
    out.push_back(summarize(values));
  }
  return out;
}

double shell_volume(int dim, double a, double b) {
  const double unit_ball = std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
  return unit_ball * (std::pow(b, dim) - std::pow(a, dim));
}

PairCorrelationTable estimate_pair_correlation(std::span<const Configuration> snapshots,
                                               std::span<const double> edges,
                                               const Eigen::VectorXd& mark_weights) {
  if (snapshots.empty()) throw EmptySampleError("estimate_pair_correlation: no snapshots");
  if (edges.size() < 2) throw ShapeError("estimate_pair_correlation: need at least two bin edges");
  const Configuration& first = snapshots.front();
  const int d = first.dim();
  const double length = first.torus_length();
  const Eigen::Index k = first.marks();
  if (mark_weights.size() != k) throw ShapeError("estimate_pair_correlation: weights have the wrong length");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] < 0.0 || edges[i] > 0.5 * length || (i > 0 && !(edges[i] > edges[i - 1])))
      throw ValidationError("estimate_pair_correlation: edges must increase within [0, L/2]");
  }

  PairCorrelationTable table;
  table.edges.assign(edges.begin(), edges.end());
  table.marks = k;
  const std::size_t bins = table.bins();
  const std::size_t cells = bins * k * k;
  const double r_min2 = edges.front() * edges.front();
  const double r_max2 = edges.back() * edges.back();

  std::vector<std::vector<double>> per_snapshot(cells);
  table.pair_counts.assign(cells, 0);
  std::vector<std::size_t> counts(cells);
  std::vector<double> flat;
  std::vector<Eigen::Index> mark_of;
  for (const auto& c : snapshots) {
    if (c.dim() != d || c.marks() != k || c.torus_length() != length)
      throw ShapeError("estimate_pair_correlation: snapshots disagree in shape");
    flat.clear();
    mark_of.clear();
    for (Eigen::Index m = 0; m < k; ++m) {
      flat.insert(flat.end(), c.bucket(m).begin(), c.bucket(m).end());
      mark_of.insert(mark_of.end(), c.count(m), m);
    }
    std::fill(counts.begin(), counts.end(), 0);
    const std::size_t n = mark_of.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = flat.data() + i * d;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double* y = flat.data() + j * d;
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          double dx = std::abs(x[a] - y[a]);
          if (dx > 0.5 * length) dx = length - dx;
          r2 += dx * dx;
        }
        if (r2 < r_min2 || r2 >= r_max2) continue;
        const double r = std::sqrt(r2);
        const std::size_t bin = static_cast<std::size_t>(
            std::upper_bound(edges.begin(), edges.end(), r) - edges.begin() - 1);
        ++counts[table.index(bin, mark_of[i], mark_of[j])];
        ++counts[table.index(bin, mark_of[j], mark_of[i])];
      }
    }
    for (std::size_t bin = 0; bin < bins; ++bin) {
      const double shell = shell_volume(d, edges[bin], edges[bin + 1]) * c.volume();
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
          const std::size_t idx = table.index(bin, a, b);
          table.pair_counts[idx] += counts[idx];
          per_snapshot[idx].push_back(static_cast<double>(counts[idx]) /
                                      (shell * mark_weights[a] * mark_weights[b]));
        }
    }
  }

  table.value.resize(cells);
  table.stderr_.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    if (table.pair_counts[i] == 0) {
      table.value[i] = std::nullopt;
      table.stderr_[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const Estimate e = summarize(per_snapshot[i]);
    table.value[i] = e.value;
    table.stderr_[i] = e.stderr_;
  }
  return table;
}

}  // namespace qc
