#include "psicalc/manifold.hpp"

#include <cmath>
#include <string>

#include "psicalc/common.hpp"

namespace psicalc {

bool is_power_of_two(int v) noexcept { return v > 0 && (v & (v - 1)) == 0; }

namespace {

// cos/sin of 2 pi k / K, with exact values on the axes.
void direction_tables(int k_count, std::vector<double>& c, std::vector<double>& s) {
  c.resize(static_cast<std::size_t>(k_count));
  s.resize(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (4 * k == 0) {
      c[i] = 1.0, s[i] = 0.0;
    } else if (4 * k == k_count) {
      c[i] = 0.0, s[i] = 1.0;
    } else if (2 * k == k_count) {
      c[i] = -1.0, s[i] = 0.0;
    } else if (4 * k == 3 * k_count) {
      c[i] = 0.0, s[i] = -1.0;
    } else {
      const double t = kTwoPi * k / k_count;
      c[i] = std::cos(t);
      s[i] = std::sin(t);
    }
  }
}

}  // namespace

ModelManifold::ModelManifold(int dim, int grid, int directions)
    : dim_(dim), grid_(grid), directions_(directions) {
  if (!is_power_of_two(grid) || grid < 8) {
    throw RejectedInput("grid resolution must be a power of two >= 8, got " + std::to_string(grid));
  }
  if (dim == 2 && (!is_power_of_two(directions) || directions < 8)) {
    throw RejectedInput("direction resolution must be a power of two >= 8, got " +
                        std::to_string(directions));
  }
  points_ = dim == 1 ? grid : grid * grid;
  mask_.resize(static_cast<std::size_t>(points_));
  for (int p = 0; p < points_; ++p) {
    const int normal_index = dim == 1 ? p : p % grid;
    mask_[static_cast<std::size_t>(p)] = 2 * normal_index <= grid ? 1 : 0;
  }
  if (dim == 2) {
    direction_tables(directions, cos_, sin_);
  } else {
    cos_ = {1.0, -1.0};
    sin_ = {0.0, 0.0};
  }
}

std::shared_ptr<const ModelManifold> ModelManifold::circle(int grid) {
  return std::shared_ptr<const ModelManifold>(new ModelManifold(1, grid, 2));
}

std::shared_ptr<const ModelManifold> ModelManifold::torus(int grid, int directions) {
  return std::shared_ptr<const ModelManifold>(new ModelManifold(2, grid, directions));
}

double ModelManifold::spacing() const noexcept { return kTwoPi / grid_; }

std::array<int, 2> ModelManifold::indices(int point) const noexcept {
  if (dim_ == 1) return {point, 0};
  return {point / grid_, point % grid_};
}

std::array<double, 2> ModelManifold::coordinates(int point) const noexcept {
  const auto ij = indices(point);
  const double h = spacing();
  return {ij[0] * h, dim_ == 1 ? 0.0 : ij[1] * h};
}

double ModelManifold::normal_coordinate(int point) const noexcept {
  const auto x = coordinates(point);
  return dim_ == 1 ? x[0] : x[1];
}

std::array<double, 2> ModelManifold::direction(int k) const noexcept { return {cos_dir(k), sin_dir(k)}; }

double ModelManifold::direction_angle(int k) const noexcept {
  if (dim_ == 1) return k == 0 ? 0.0 : kPi;
  return kTwoPi * k / directions_;
}

double ModelManifold::direction_weight() const noexcept {
  return dim_ == 1 ? 1.0 : kTwoPi / directions_;
}

void require_same_manifold(const ModelManifold& a, const ModelManifold& b, const char* where) {
  if (!(a == b)) throw ShapeMismatch(std::string(where) + ": grid mismatch");
}

}  // namespace psicalc
