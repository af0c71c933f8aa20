#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace psicalc {

/// Flat model geometry: the closed manifold is the circle R/2piZ (n = 1) or the
/// square torus (n = 2), sampled on a uniform periodic grid.  The compact piece
/// X is the arc [0, pi] (n = 1) or the cylinder x2 in [0, pi] (n = 2); grid
/// points on the boundary belong to X.
///
/// Directions on the cosphere: n = 1 uses the two points {+1, -1} (index 0 and
/// 1); n = 2 uses K equispaced angles theta_k = 2 pi k / K.
class ModelManifold {
 public:
  static std::shared_ptr<const ModelManifold> circle(int grid);
  static std::shared_ptr<const ModelManifold> torus(int grid, int directions);

  int dim() const noexcept { return dim_; }
  int grid() const noexcept { return grid_; }
  int directions() const noexcept { return directions_; }
  int points() const noexcept { return points_; }
  double spacing() const noexcept;

  int index(int i1, int i2 = 0) const noexcept { return i1 * (dim_ == 2 ? grid_ : 1) + i2; }
  /// Grid indices (i1, i2) of a flat point index; i2 = 0 for n = 1.
  std::array<int, 2> indices(int point) const noexcept;
  std::array<double, 2> coordinates(int point) const noexcept;
  /// Coordinate normal to the boundary of X: x for n = 1, x2 for n = 2.
  double normal_coordinate(int point) const noexcept;

  /// Unit covector of a direction index.
  std::array<double, 2> direction(int k) const noexcept;
  double direction_angle(int k) const noexcept;
  /// cos/sin of direction angles, exact at quarter turns.
  double cos_dir(int k) const noexcept { return cos_[static_cast<std::size_t>(k)]; }
  double sin_dir(int k) const noexcept { return sin_[static_cast<std::size_t>(k)]; }
  /// Weight of one direction node in the cosphere quadrature (before 1/(2pi)^n).
  double direction_weight() const noexcept;

  bool in_x(int point) const noexcept { return mask_[static_cast<std::size_t>(point)] != 0; }
  const std::vector<std::uint8_t>& x_mask() const noexcept { return mask_; }

  bool operator==(const ModelManifold& o) const noexcept {
    return dim_ == o.dim_ && grid_ == o.grid_ && directions_ == o.directions_;
  }

 private:
  ModelManifold(int dim, int grid, int directions);

  int dim_;
  int grid_;
  int directions_;
  int points_;
  std::vector<std::uint8_t> mask_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

using ManifoldPtr = std::shared_ptr<const ModelManifold>;

bool is_power_of_two(int v) noexcept;

/// Throws ShapeMismatch unless both manifolds describe the same grids.
void require_same_manifold(const ModelManifold& a, const ModelManifold& b, const char* where);

}  // namespace psicalc
