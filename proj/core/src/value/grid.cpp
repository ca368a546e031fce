#include "safefilter/value/grid.hpp"

#include "safefilter/harness/csv.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace safefilter::value {

GridSpec::GridSpec(const Vec& lower, const Vec& upper, const std::vector<int>& points) {
  require(lower.size() == upper.size(), "GridSpec: bound dimension mismatch");
  require(static_cast<std::size_t>(lower.size()) == points.size(),
          "GridSpec: points dimension mismatch");
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    require(points[i] >= 2, "GridSpec: need at least 2 points per axis");
    require(lower[i] < upper[i], "GridSpec: lo must be < hi");
    axes.push_back({lower[i], upper[i], points[i]});
    total *= static_cast<std::size_t>(points[i]);
    require(total <= kCellCap, "GridSpec: node count exceeds the configured cap");
  }
}

std::size_t GridSpec::node_count() const {
  std::size_t total = 1;
  for (const Axis& a : axes) total *= static_cast<std::size_t>(a.points);
  return total;
}

double GridSpec::spacing(int axis) const {
  const Axis& a = axes.at(axis);
  return (a.hi - a.lo) / (a.points - 1);
}

std::size_t GridSpec::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < axes.size(); ++d)
    flat = flat * static_cast<std::size_t>(axes[d].points) + static_cast<std::size_t>(idx[d]);
  return flat;
}

std::vector<int> GridSpec::axis_index(std::size_t flat) const {
  std::vector<int> idx(axes.size());
  for (std::size_t d = axes.size(); d-- > 0;) {
    idx[d] = static_cast<int>(flat % static_cast<std::size_t>(axes[d].points));
    flat /= static_cast<std::size_t>(axes[d].points);
  }
  return idx;
}

Vec GridSpec::node(std::size_t flat) const {
  auto idx = axis_index(flat);
  Vec x(dim());
  for (int d = 0; d < dim(); ++d) x[d] = axes[d].lo + idx[d] * spacing(d);
  return x;
}

bool GridSpec::contains(const Vec& x) const {
  for (int d = 0; d < dim(); ++d)
    if (x[d] < axes[d].lo || x[d] > axes[d].hi) return false;
  return true;
}

GridValueFunction::GridValueFunction(GridSpec grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  require(values_.size() == grid_.node_count(), "GridValueFunction: value count mismatch");
  require(grid_.dim() >= 1 && grid_.dim() <= 3, "GridValueFunction: dimension cap is 3");
  init_strides();
}

GridValueFunction::GridValueFunction(GridSpec grid, double fill)
    : grid_(std::move(grid)), values_(grid_.node_count(), fill) {
  require(grid_.dim() >= 1 && grid_.dim() <= 3, "GridValueFunction: dimension cap is 3");
  init_strides();
}

void GridValueFunction::init_strides() {
  strides_.assign(grid_.axes.size(), 1);
  for (std::size_t d = grid_.axes.size(); d-- > 1;)
    strides_[d - 1] = strides_[d] * static_cast<std::size_t>(grid_.axes[d].points);
  axis_cache_.clear();
  for (int a = 0; a < grid_.dim(); ++a) {
    const auto& ax = grid_.axes[a];
    axis_cache_.push_back({ax.lo, (ax.points - 1) / (ax.hi - ax.lo), ax.points});
  }
}

GridValueFunction::Stencil GridValueFunction::stencil(const Vec& x) const {
  const int d = grid_.dim();
  int base_idx[3];
  double frac[3];
  for (int a = 0; a < d; ++a) {
    const AxisCache& ax = axis_cache_[a];
    double t = (x[a] - ax.lo) * ax.inv_h;
    // clamp-to-edge extrapolation
    if (t <= 0.0) {
      base_idx[a] = 0;
      frac[a] = 0.0;
    } else if (t >= ax.points - 1) {
      base_idx[a] = ax.points - 2;
      frac[a] = 1.0;
    } else {
      base_idx[a] = static_cast<int>(t);
      frac[a] = t - base_idx[a];
    }
  }
  Stencil s;
  s.size = 1 << d;
  for (int corner = 0; corner < s.size; ++corner) {
    std::size_t flat = 0;
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      int bit = (corner >> a) & 1;
      flat += strides_[a] * static_cast<std::size_t>(base_idx[a] + bit);
      w *= bit ? frac[a] : (1.0 - frac[a]);
    }
    s.corner[corner] = static_cast<std::uint32_t>(flat);
    s.weight[corner] = w;
  }
  return s;
}

double GridValueFunction::operator()(const Vec& x) const { return apply(stencil(x)); }

double GridValueFunction::min_value() const {
  return *std::min_element(values_.begin(), values_.end());
}

double GridValueFunction::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

void GridValueFunction::write_csv(std::ostream& out) const {
  using harness::format_double;
  std::vector<std::string> header;
  for (int d = 0; d < grid_.dim(); ++d) header.push_back("x_" + std::to_string(d));
  header.push_back("value");
  out << harness::join_csv_row(header);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    Vec x = grid_.node(i);
    std::vector<std::string> row;
    for (int d = 0; d < grid_.dim(); ++d) row.push_back(format_double(x[d]));
    row.push_back(format_double(values_[i]));
    out << harness::join_csv_row(row);
  }
}

}  // namespace safefilter::value
