#include "safefilter/objective/objective.hpp"

#include <cmath>

namespace safefilter::objective {

double safe_threshold(double gamma, double c_min_bound, double c_hat) {
  require(std::isfinite(c_min_bound), "safe_threshold: c_min_bound must be finite");
  return gamma * c_min_bound + c_hat;
}

SafetyObjective make_objective(ImmediateCost cost, double gamma, double xi_fraction,
                               std::optional<double> xi_absolute,
                               std::optional<double> c_min_override) {
  require(gamma > 0.0 && gamma < 1.0, "make_objective: gamma must lie in (0,1)");
  SafetyObjective obj;
  obj.gamma = gamma;
  obj.c_min_bound = c_min_override ? *c_min_override : cost.c_lower / (1.0 - gamma);
  obj.cost = std::move(cost);
  obj.xi_bar = safe_threshold(gamma, obj.c_min_bound, obj.cost.c_hat);
  obj.xi = xi_absolute ? *xi_absolute : xi_fraction * obj.xi_bar;
  require(obj.xi < obj.xi_bar, "make_objective: xi must be strictly below xi_bar");
  return obj;
}

std::pair<double, double> cumulative_cost_mc(const StepFn& dynamics, const PolicyFn& policy,
                                             const ImmediateCost& cost, double gamma,
                                             const Vec& x0, int n_rollouts, RandomSource& rng,
                                             int horizon) {
  require(n_rollouts >= 1, "cumulative_cost_mc: n_rollouts >= 1");
  if (horizon < 0) {
    double c_max = std::max(std::abs(cost.c_lower), std::abs(cost.c_upper));
    horizon = truncation_horizon(gamma, c_max, 1e-6);
  }
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n_rollouts; ++i) {
    Trajectory traj = rollout(dynamics, policy, x0, horizon, rng);
    double c = discounted_cost(traj, cost.c, gamma);
    sum += c;
    sum_sq += c * c;
  }
  double mean = sum / n_rollouts;
  double var = std::max(0.0, sum_sq / n_rollouts - mean * mean);
  double se = n_rollouts > 1 ? std::sqrt(var / (n_rollouts - 1)) : 0.0;
  return {mean, se};
}

}  // namespace safefilter::objective
