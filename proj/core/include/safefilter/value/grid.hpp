#pragma once

#include "safefilter/common.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace safefilter::value {

/// Rectilinear grid over the state box with a fixed node count per axis.
struct GridSpec {
  struct Axis {
    double lo;
    double hi;
    int points;
  };

  std::vector<Axis> axes;
  static constexpr std::size_t kCellCap = 1000000;

  GridSpec() = default;
  GridSpec(const Vec& lower, const Vec& upper, const std::vector<int>& points);

  int dim() const { return static_cast<int>(axes.size()); }
  std::size_t node_count() const;
  double spacing(int axis) const;

  /// Flat index <-> per-axis node index (row-major, last axis fastest).
  std::size_t flat_index(const std::vector<int>& idx) const;
  std::vector<int> axis_index(std::size_t flat) const;
  Vec node(std::size_t flat) const;

  bool contains(const Vec& x) const;
};

/// Multilinear interpolant of node values with clamp-to-edge extrapolation.
class GridValueFunction {
 public:
  GridValueFunction() = default;
  GridValueFunction(GridSpec grid, std::vector<double> values);
  GridValueFunction(GridSpec grid, double fill);

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double operator()(const Vec& x) const;

  double min_value() const;
  double max_value() const;

  /// Node coordinates + value, one row per node.
  void write_csv(std::ostream& out) const;

  /// Interpolation stencil at x: flat corner indices and convex weights
  /// (2^dim entries). Exposed so solvers can pre-compute transition tables.
  struct Stencil {
    std::array<std::uint32_t, 8> corner;
    std::array<double, 8> weight;
    int size;
  };
  Stencil stencil(const Vec& x) const;
  double apply(const Stencil& s) const {
    double acc = 0.0;
    for (int i = 0; i < s.size; ++i) acc += s.weight[i] * values_[s.corner[i]];
    return acc;
  }

 private:
  GridSpec grid_;
  std::vector<double> values_;
  std::vector<std::size_t> strides_;
  struct AxisCache {
    double lo;
    double inv_h;
    int points;
  };
  std::vector<AxisCache> axis_cache_;
  void init_strides();
};

}  // namespace safefilter::value
