#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qc {

/// Symmetric cubic lattice of momenta p = -P + j * dp, j = 0..n-1 per axis,
/// with n odd so that the lattice contains p = 0. Mode indices enumerate
/// every lattice point except p = 0.
class MomentumGrid {
 public:
  MomentumGrid(int dim, double extent, int points_per_axis);

  /// Lattice commensurate with a torus of side L: spacing 2 pi / L.
  static MomentumGrid for_torus(int dim, double torus_length, int points_per_axis);

  int dim() const { return dim_; }
  double extent() const { return extent_; }
  int points_per_axis() const { return n_; }
  double spacing() const { return spacing_; }
  /// dp^d.
  double cell_volume() const { return cell_volume_; }
  /// (dp / 2 pi)^d: weight of one mode in the inverse transform.
  double inverse_weight() const { return inverse_weight_; }
  std::size_t mode_count() const { return mode_count_; }
  std::size_t lattice_size() const { return mode_count_ + 1; }

  double axis_value(int j) const { return -extent_ + spacing_ * j; }
  /// Writes the momentum vector of mode `mode` into p (size dim).
  void mode(std::size_t mode, std::span<double> p) const;
  std::vector<double> mode(std::size_t mode) const;
  /// Per-axis lattice indices of a mode.
  void axis_indices(std::size_t mode, std::span<int> idx) const;
  /// Index of the mode holding -p.
  std::size_t negated(std::size_t mode) const { return mode_count_ - 1 - mode; }
  /// Real-space separations with every |w_k| below this are free of aliasing.
  double resolvable_range() const;

 private:
  std::size_t flat_of_mode(std::size_t mode) const {
    return mode < center_ ? mode : mode + 1;
  }

  int dim_;
  double extent_;
  int n_;
  double spacing_;
  double cell_volume_;
  double inverse_weight_;
  std::size_t mode_count_;
  std::size_t center_;
};

}  // namespace qc
