#include "safefilter/filter/filter.hpp"

#include "safefilter/harness/csv.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace safefilter::filter {

double filter_constraint_value(const Vec& x, const Vec& u, const model::CalibratedModel& model,
                               const value::GridValueFunction& vp_safe,
                               const value::NoiseQuadrature& quad, const FilterConfig& config) {
  model::Prediction p = model.predict(x, u);
  return value::worst_case_next_value(vp_safe, p.mu, model.beta() * p.sigma, quad,
                                      config.inner_eta, nullptr);
}

FilterResult filter_action(const Vec& x, const Vec& u_nominal,
                           const model::CalibratedModel& model,
                           const value::GridValueFunction& vp_safe, const Box& action_box,
                           const FilterConfig& config, const value::NoiseQuadrature& quad,
                           RandomSource& rng) {
  // The search space is the action box; a nominal outside it is clamped first.
  const Vec u_nom = action_box.clamp(u_nominal);
  FilterResult result;
  result.diag.worst_case_nominal = filter_constraint_value(x, u_nom, model, vp_safe, quad, config);
  ++result.diag.constraint_evals;

  // Constraint-slack shortcut: a feasible nominal action passes unchanged.
  if (result.diag.worst_case_nominal <= config.xi) {
    result.u = u_nom;
    result.diag.nominal_feasible = true;
    result.diag.worst_case_chosen = result.diag.worst_case_nominal;
    result.diag.distance = 0.0;
    return result;
  }

  // CEM over actions, initialized at the nominal action. Infeasible particles
  // rank strictly below every feasible one, then by violation magnitude.
  constexpr double kInfeasiblePenalty = 1e9;
  double best_wc = std::numeric_limits<double>::infinity();
  Vec best_u;
  auto score = [&](const Vec& u) {
    double wc = filter_constraint_value(x, u, model, vp_safe, quad, config);
    ++result.diag.constraint_evals;
    if (wc <= config.xi) {
      double dist = (u - u_nom).norm();
      if (best_u.size() == 0 || dist < (best_u - u_nom).norm()) {
        best_u = u;
        best_wc = wc;
      }
      return -dist;
    }
    return -kInfeasiblePenalty - (wc - config.xi);
  };

  // Deterministic anchors keep narrow feasible sets discoverable: the box
  // center and every box corner (the action dimension is small).
  score(action_box.center());
  const int du = static_cast<int>(action_box.dim());
  for (int corner = 0; corner < (1 << du); ++corner) {
    Vec u(du);
    for (int d = 0; d < du; ++d)
      u[d] = (corner >> d) & 1 ? action_box.upper[d] : action_box.lower[d];
    score(u);
  }

  backup::CemOptions cem;
  cem.particles = config.cem_particles;
  cem.iterations = config.cem_iterations;
  cem.elite_fraction = config.cem_elite_fraction;
  Vec init_std = config.cem_init_std_frac * (action_box.upper - action_box.lower);
  backup::cem_optimize(score, u_nom, init_std, cem, rng, &action_box);

  if (best_u.size() == 0) {
    result.u = u_nom;
    result.diag.infeasible = true;
    result.diag.worst_case_chosen = result.diag.worst_case_nominal;
    return result;
  }

  // Polish: bisect the feasibility boundary on the segment from the best
  // feasible action toward the nominal one. Keeps the feasible invariant on
  // the lower end, so the result only ever moves closer.
  {
    double lo = 0.0, hi = 1.0;  // u(t) = best_u + t (u_nom - best_u); u(0) feasible
    for (int it = 0; it < 40; ++it) {
      double mid = 0.5 * (lo + hi);
      Vec u = best_u + mid * (u_nom - best_u);
      double wc = filter_constraint_value(x, u, model, vp_safe, quad, config);
      ++result.diag.constraint_evals;
      (wc <= config.xi ? lo : hi) = mid;
    }
    if (lo > 0.0) {
      best_u = best_u + lo * (u_nom - best_u);
      best_wc = filter_constraint_value(x, best_u, model, vp_safe, quad, config);
      ++result.diag.constraint_evals;
    }
  }

  result.u = best_u;
  result.diag.worst_case_chosen = best_wc;
  result.diag.distance = (best_u - u_nom).norm();
  return result;
}

Vec combined_policy(const Vec& x, const PolicyFn& nominal, const PolicyFn& pi_safe,
                    const value::GridValueFunction& vp_safe, const model::CalibratedModel& model,
                    const Box& action_box, const FilterConfig& config,
                    const value::NoiseQuadrature& quad, RandomSource& rng,
                    FilterDiagnostics* diag, int* branch) {
  if (vp_safe(x) > config.xi) {
    // Outside the certified sub-level set: recover with the safe policy.
    if (branch) *branch = 3;
    if (diag) *diag = FilterDiagnostics{};
    return pi_safe(x);
  }
  FilterResult filtered =
      filter_action(x, nominal(x), model, vp_safe, action_box, config, quad, rng);
  if (diag) *diag = filtered.diag;
  if (filtered.diag.infeasible) {
    if (branch) *branch = 2;
    return pi_safe(x);
  }
  if (branch) *branch = filtered.diag.nominal_feasible ? 0 : 1;
  return filtered.u;
}

RolloutMetrics rollout_filtered(const envs::Environment& env, const PolicyFn& nominal,
                                const PolicyFn& pi_safe,
                                const value::GridValueFunction& vp_safe,
                                const model::CalibratedModel& model,
                                const objective::ImmediateCost& cost, double gamma,
                                const FilterConfig& config, const value::NoiseQuadrature& quad,
                                int horizon, RandomSource& rng, std::ostream* diagnostics_csv) {
  using harness::format_double;
  RolloutMetrics metrics;
  Vec x = envs::initial_state(env, rng);
  metrics.trajectory.states.push_back(x);

  if (diagnostics_csv) {
    std::vector<std::string> header{"k"};
    for (int d = 0; d < env.state_dim(); ++d) header.push_back("x_" + std::to_string(d));
    for (int d = 0; d < env.action_dim(); ++d) header.push_back("u_nom_" + std::to_string(d));
    for (int d = 0; d < env.action_dim(); ++d) header.push_back("u_filt_" + std::to_string(d));
    header.push_back("worst_case");
    header.push_back("branch");
    *diagnostics_csv << harness::join_csv_row(header);
  }

  double g = 1.0;
  for (int k = 0; k < horizon; ++k) {
    if (!envs::safe_indicator(env, x)) ++metrics.violation_count;
    metrics.discounted_cost += g * cost.c(x);

    Vec u_nom = nominal(x);
    FilterDiagnostics diag;
    int branch = 0;
    Vec u = combined_policy(x, [&](const Vec&) { return u_nom; }, pi_safe, vp_safe, model,
                            env.action_box, config, quad, rng, &diag, &branch);
    double applied_distance = (u - u_nom).norm();
    if (applied_distance > 0.0) ++metrics.intervention_count;
    if (branch == 2) ++metrics.infeasible_count;
    metrics.total_filter_distance += applied_distance;
    metrics.discounted_return += g * env.reward(x, u);

    if (diagnostics_csv) {
      std::vector<std::string> row{std::to_string(k)};
      for (int d = 0; d < env.state_dim(); ++d) row.push_back(format_double(x[d]));
      for (int d = 0; d < env.action_dim(); ++d) row.push_back(format_double(u_nom[d]));
      for (int d = 0; d < env.action_dim(); ++d) row.push_back(format_double(u[d]));
      double wc = branch == 3 ? filter_constraint_value(x, u, model, vp_safe, quad, config)
                              : diag.worst_case_chosen;
      row.push_back(format_double(wc));
      row.push_back(std::to_string(branch));
      *diagnostics_csv << harness::join_csv_row(row);
    }

    x = envs::step(env, x, u, rng);
    metrics.trajectory.actions.push_back(u);
    metrics.trajectory.states.push_back(x);
    g *= gamma;
  }
  if (!envs::safe_indicator(env, x)) ++metrics.violation_count;
  metrics.discounted_cost += g * cost.c(x);
  return metrics;
}

}  // namespace safefilter::filter
