#pragma once

#include "safefilter/backup/tabular.hpp"
#include "safefilter/model/calibrated.hpp"
#include "safefilter/objective/cost.hpp"
#include "safefilter/value/solver.hpp"

namespace safefilter::backup {

struct RobustViOptions {
  value::SolveOptions solve;
  value::EtaSearchOptions eta;        // inner adversary used inside the action loop
  int action_points_per_dim = 17;
  double tie_tol = 1e-9;  // actions within tie_tol of the best count as tied
};

struct RobustViResult {
  value::GridValueFunction value;  // fixed point of V = c + gamma min_u max_eta E[V]
  TabularPolicy policy;
  value::SolveStats stats;
};

/// Robust value iteration over the calibrated model set. The greedy argmin
/// breaks ties (values within tie_tol) toward the smallest-Euclidean-norm
/// action, then toward the lowest lattice index.
RobustViResult robust_value_iteration(const model::CalibratedModel& model,
                                      const objective::ImmediateCost& cost, double gamma,
                                      const value::GridSpec& grid, const Box& action_box,
                                      const value::NoiseQuadrature& quad,
                                      const RobustViOptions& opts = {});

}  // namespace safefilter::backup
