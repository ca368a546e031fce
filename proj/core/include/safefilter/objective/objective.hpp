#pragma once

#include "safefilter/objective/cost.hpp"
#include "safefilter/random.hpp"

#include <optional>

namespace safefilter::objective {

/// Safety objective: immediate cost, discount, the certified lower bound on
/// min_x C, and the thresholds xi < xi_bar.
struct SafetyObjective {
  ImmediateCost cost;
  double gamma = 0.99;
  double c_min_bound = 0.0;  // lower bound on min_x C; c_lower/(1-gamma) by default
  double xi_bar = 0.0;
  double xi = 0.0;
};

/// Tightened level threshold xi_bar = gamma * c_min_bound + c_hat. A lower
/// bound on min_x C keeps the resulting sub-level set valid (possibly smaller).
double safe_threshold(double gamma, double c_min_bound, double c_hat);

/// Builds the objective with the analytic bound c_min_bound = c_lower/(1-gamma)
/// (or an explicit override, e.g. a grid estimate) and xi = xi_fraction*xi_bar
/// unless an absolute xi is given.
SafetyObjective make_objective(ImmediateCost cost, double gamma, double xi_fraction = 0.5,
                               std::optional<double> xi_absolute = std::nullopt,
                               std::optional<double> c_min_override = std::nullopt);

/// Monte-Carlo estimate of C(f, pi; x0) with truncation at `horizon`
/// (truncation_horizon() when horizon < 0). Returns (mean, standard error).
std::pair<double, double> cumulative_cost_mc(const StepFn& dynamics, const PolicyFn& policy,
                                             const ImmediateCost& cost, double gamma,
                                             const Vec& x0, int n_rollouts, RandomSource& rng,
                                             int horizon = -1);

}  // namespace safefilter::objective
