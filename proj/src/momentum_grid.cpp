#include "quasicontact/momentum_grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "quasicontact/errors.hpp"

namespace qc {

MomentumGrid::MomentumGrid(int dim, double extent, int points_per_axis)
    : dim_(dim), extent_(extent), n_(points_per_axis) {
  if (dim < 1) throw ValidationError("momentum grid: dim must be >= 1");
  if (!(extent > 0.0) || !std::isfinite(extent))
    throw ValidationError("momentum grid: extent must be positive");
  if (points_per_axis < 3 || points_per_axis % 2 == 0)
    throw ValidationError("momentum grid: points_per_axis must be odd and >= 3, got " +
                          std::to_string(points_per_axis));
  spacing_ = 2.0 * extent_ / (n_ - 1);
  cell_volume_ = std::pow(spacing_, dim_);
  inverse_weight_ = std::pow(spacing_ / (2.0 * std::numbers::pi), dim_);
  std::size_t total = 1;
  for (int k = 0; k < dim_; ++k) total *= static_cast<std::size_t>(n_);
  mode_count_ = total - 1;
  center_ = total / 2;
}

MomentumGrid MomentumGrid::for_torus(int dim, double torus_length, int points_per_axis) {
  if (!(torus_length > 0.0)) throw ValidationError("momentum grid: torus length must be positive");
  const double dp = 2.0 * std::numbers::pi / torus_length;
  return MomentumGrid(dim, dp * (points_per_axis - 1) / 2.0, points_per_axis);
}

void MomentumGrid::axis_indices(std::size_t mode, std::span<int> idx) const {
  std::size_t flat = flat_of_mode(mode);
  for (int k = dim_ - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(flat % static_cast<std::size_t>(n_));
    flat /= static_cast<std::size_t>(n_);
  }
}

void MomentumGrid::mode(std::size_t mode, std::span<double> p) const {
  std::size_t flat = flat_of_mode(mode);
  for (int k = dim_ - 1; k >= 0; --k) {
    p[k] = axis_value(static_cast<int>(flat % static_cast<std::size_t>(n_)));
    flat /= static_cast<std::size_t>(n_);
  }
}

std::vector<double> MomentumGrid::mode(std::size_t m) const {
  std::vector<double> p(dim_);
  mode(m, p);
  return p;
}

double MomentumGrid::resolvable_range() const { return std::numbers::pi / spacing_; }

}  // namespace qc
