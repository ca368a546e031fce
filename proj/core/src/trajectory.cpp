#include "safefilter/trajectory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace safefilter {

Trajectory rollout(const StepFn& dynamics, const PolicyFn& policy, const Vec& x0,
                   int horizon, RandomSource& rng) {
  require(horizon >= 0, "rollout: horizon must be >= 0");
  require_finite(x0, "rollout: x0");

  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.actions.reserve(static_cast<std::size_t>(horizon));
  traj.states.push_back(x0);

  Vec x = x0;
  for (int k = 0; k < horizon; ++k) {
    Vec u = policy(x);
    Vec next = dynamics(x, u, rng);
    if (!next.allFinite())
      throw std::runtime_error("rollout: non-finite state at step " + std::to_string(k));
    traj.actions.push_back(std::move(u));
    traj.states.push_back(next);
    x = std::move(next);
  }
  return traj;
}

double discounted_return(const Trajectory& traj, const RewardFn& reward, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, "discounted_return: gamma must lie in (0,1)");
  double sum = 0.0;
  double g = 1.0;
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    sum += g * reward(traj.states[k], traj.actions[k]);
    g *= gamma;
  }
  return sum;
}

double discounted_cost(const Trajectory& traj, const CostFn& cost, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, "discounted_cost: gamma must lie in (0,1)");
  double sum = 0.0;
  double g = 1.0;
  for (const Vec& x : traj.states) {
    sum += g * cost(x);
    g *= gamma;
  }
  return sum;
}

int truncation_horizon(double gamma, double c_max, double tol) {
  require(gamma > 0.0 && gamma < 1.0, "truncation_horizon: gamma must lie in (0,1)");
  require(c_max >= 0.0 && tol > 0.0, "truncation_horizon: c_max >= 0 and tol > 0");
  if (c_max == 0.0) return 0;
  // gamma^K < tol (1-gamma) / c_max
  double rhs = tol * (1.0 - gamma) / c_max;
  if (rhs >= 1.0) return 0;
  return static_cast<int>(std::ceil(std::log(rhs) / std::log(gamma))) + 1;
}

}  // namespace safefilter
