#pragma once

#include "safefilter/backup/cem.hpp"
#include "safefilter/envs/environment.hpp"
#include "safefilter/model/calibrated.hpp"
#include "safefilter/objective/cost.hpp"
#include "safefilter/value/eta_search.hpp"
#include "safefilter/value/solver.hpp"

#include <iosfwd>
#include <optional>

namespace safefilter::filter {

/// Online filter configuration. `xi` is the constraint level on the
/// worst-case expected next value of the safe policy's pessimistic value.
struct FilterConfig {
  double xi = 0.5;
  int cem_particles = 1000;
  int cem_iterations = 5;
  double cem_elite_fraction = 0.1;
  double cem_init_std_frac = 0.25;  // of the action range, centered on u_nominal
  value::EtaSearchOptions inner_eta{value::EtaSearchOptions::Mode::VertexPlusCenter, false, 9,
                                    true};

  void validate(double xi_bar) const {
    require(xi < xi_bar, "FilterConfig: xi must be strictly below xi_bar");
    int elites = static_cast<int>(cem_elite_fraction * cem_particles);
    require(cem_particles >= 10 * std::max(1, elites),
            "FilterConfig: particles must be >= 10x elite count");
  }
};

/// Constraint functional of the filter: max over the hallucination box of the
/// expected next value, worst_case(x, u) = max_n E[V(mu + beta sigma .* n + w)].
double filter_constraint_value(const Vec& x, const Vec& u, const model::CalibratedModel& model,
                               const value::GridValueFunction& vp_safe,
                               const value::NoiseQuadrature& quad, const FilterConfig& config);

struct FilterDiagnostics {
  double worst_case_nominal = 0.0;
  double worst_case_chosen = 0.0;
  bool nominal_feasible = false;
  bool infeasible = false;   // no sampled action satisfied the constraint
  double distance = 0.0;     // ||u_filtered - u_nominal||
  int constraint_evals = 0;
};

struct FilterResult {
  Vec u;
  FilterDiagnostics diag;
};

/// Minimal modification of the nominal action subject to the pessimistic
/// next-value constraint. The nominal action is checked first and returned
/// unchanged when feasible; otherwise a CEM search over the action box looks
/// for the closest feasible action. When nothing sampled is feasible the
/// result carries infeasible = true and the caller falls back to the safe
/// policy.
FilterResult filter_action(const Vec& x, const Vec& u_nominal,
                           const model::CalibratedModel& model,
                           const value::GridValueFunction& vp_safe, const Box& action_box,
                           const FilterConfig& config, const value::NoiseQuadrature& quad,
                           RandomSource& rng);

/// Combined roll-out policy: the filtered nominal action inside the certified
/// sub-level set {Vp <= xi} (safe policy on filter infeasibility), the safe
/// policy outside. Total.
Vec combined_policy(const Vec& x, const PolicyFn& nominal, const PolicyFn& pi_safe,
                    const value::GridValueFunction& vp_safe, const model::CalibratedModel& model,
                    const Box& action_box, const FilterConfig& config,
                    const value::NoiseQuadrature& quad, RandomSource& rng,
                    FilterDiagnostics* diag = nullptr, int* branch = nullptr);

struct RolloutMetrics {
  double discounted_return = 0.0;
  double discounted_cost = 0.0;
  int violation_count = 0;      // steps with unsafe state
  int intervention_count = 0;   // steps where the applied action differs from nominal
  int infeasible_count = 0;
  double total_filter_distance = 0.0;
  Trajectory trajectory;
};

/// Full filtered episode with per-step diagnostics, optionally streamed as
/// CSV rows (k, state..., u_nom..., u_filt..., worst_case, branch).
RolloutMetrics rollout_filtered(const envs::Environment& env, const PolicyFn& nominal,
                                const PolicyFn& pi_safe,
                                const value::GridValueFunction& vp_safe,
                                const model::CalibratedModel& model,
                                const objective::ImmediateCost& cost, double gamma,
                                const FilterConfig& config, const value::NoiseQuadrature& quad,
                                int horizon, RandomSource& rng,
                                std::ostream* diagnostics_csv = nullptr);

}  // namespace safefilter::filter
