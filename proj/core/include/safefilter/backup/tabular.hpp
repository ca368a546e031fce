#pragma once

#include "safefilter/geometry.hpp"
#include "safefilter/value/grid.hpp"

#include <vector>

namespace safefilter::backup {

/// Grid policy with nearest-node lookup; policies need not be continuous
/// across cells. Every stored action lies in the action box.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(value::GridSpec grid, std::vector<Vec> actions, Box action_box);

  Vec operator()(const Vec& x) const;

  const value::GridSpec& grid() const { return grid_; }
  const std::vector<Vec>& actions() const { return actions_; }
  const Box& action_box() const { return action_box_; }

 private:
  value::GridSpec grid_;
  std::vector<Vec> actions_;
  Box action_box_;
};

/// Uniform per-dimension action lattice over the action box (the argmin
/// candidate set for robust value iteration).
std::vector<Vec> action_lattice(const Box& action_box, int points_per_dim);

}  // namespace safefilter::backup
