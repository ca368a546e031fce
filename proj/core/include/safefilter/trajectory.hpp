#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"

#include <functional>
#include <vector>

namespace safefilter {

/// One stochastic transition x' = f(x, u) + w. The draw comes from `rng`.
using StepFn = std::function<Vec(const Vec& x, const Vec& u, RandomSource& rng)>;
/// State feedback policy.
using PolicyFn = std::function<Vec(const Vec& x)>;
/// State-only immediate cost.
using CostFn = std::function<double(const Vec& x)>;
/// Immediate reward on (state, action).
using RewardFn = std::function<double(const Vec& x, const Vec& u)>;

/// Closed-loop roll-out: K actions, K+1 states, states[k+1] produced from
/// (states[k], actions[k]).
struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;

  std::size_t steps() const { return actions.size(); }
};

/// Rolls the policy out for `horizon` transitions. Aborts with the step index
/// in the message if a non-finite state is produced.
Trajectory rollout(const StepFn& dynamics, const PolicyFn& policy, const Vec& x0,
                   int horizon, RandomSource& rng);

/// sum_k gamma^k r(x_k, u_k) over the trajectory's transitions.
double discounted_return(const Trajectory& traj, const RewardFn& reward, double gamma);

/// sum_k gamma^k c(x_k) over all states of the trajectory.
double discounted_cost(const Trajectory& traj, const CostFn& cost, double gamma);

/// Smallest K with gamma^K * c_max / (1 - gamma) < tol, so a K-step truncation
/// of the infinite-horizon sum is within tol for |c| <= c_max.
int truncation_horizon(double gamma, double c_max, double tol = 1e-6);

}  // namespace safefilter
