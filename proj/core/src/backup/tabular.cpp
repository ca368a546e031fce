#include "safefilter/backup/tabular.hpp"

#include <cmath>

namespace safefilter::backup {

TabularPolicy::TabularPolicy(value::GridSpec grid, std::vector<Vec> actions, Box action_box)
    : grid_(std::move(grid)), actions_(std::move(actions)), action_box_(std::move(action_box)) {
  require(actions_.size() == grid_.node_count(), "TabularPolicy: one action per node");
  for (const Vec& u : actions_)
    require(action_box_.contains(u, 1e-12), "TabularPolicy: action outside the action box");
}

Vec TabularPolicy::operator()(const Vec& x) const {
  std::vector<int> idx(grid_.dim());
  for (int d = 0; d < grid_.dim(); ++d) {
    const auto& ax = grid_.axes[d];
    double h = (ax.hi - ax.lo) / (ax.points - 1);
    double t = (x[d] - ax.lo) / h;
    int i = static_cast<int>(std::lround(t));
    idx[d] = std::min(std::max(i, 0), ax.points - 1);
  }
  return actions_[grid_.flat_index(idx)];
}

std::vector<Vec> action_lattice(const Box& action_box, int points_per_dim) {
  require(points_per_dim >= 1, "action_lattice: points_per_dim >= 1");
  const int du = static_cast<int>(action_box.dim());
  std::size_t total = 1;
  for (int d = 0; d < du; ++d) total *= static_cast<std::size_t>(points_per_dim);
  std::vector<Vec> out;
  out.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    Vec u(du);
    for (int d = du - 1; d >= 0; --d) {
      int j = static_cast<int>(rest % static_cast<std::size_t>(points_per_dim));
      rest /= static_cast<std::size_t>(points_per_dim);
      u[d] = points_per_dim == 1
                 ? 0.5 * (action_box.lower[d] + action_box.upper[d])
                 : action_box.lower[d] +
                       j * (action_box.upper[d] - action_box.lower[d]) / (points_per_dim - 1);
    }
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace safefilter::backup
