#pragma once

#include "safefilter/model/calibrated.hpp"
#include "safefilter/noise.hpp"
#include "safefilter/trajectory.hpp"
#include "safefilter/value/eta_search.hpp"
#include "safefilter/value/grid.hpp"
#include "safefilter/value/quadrature.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace safefilter::value {

struct SolveOptions {
  double tol = 1e-8;       // sup-norm Bellman residual
  int max_sweeps = 200000;
  bool plain_vi = false;   // disable the frozen-transition acceleration
};

struct SolveStats {
  int sweeps = 0;                     // Bellman sweeps (excludes frozen inner sweeps)
  int inner_sweeps = 0;
  double residual = 0.0;
  std::vector<double> residual_log;   // Bellman residual per sweep
};

/// Enumerated stochastic transition: fills (weight, next_state) pairs for a
/// state. Covers both quadrature expansions and exact finite-chain rows.
using ExpandFn =
    std::function<void(const Vec& x, std::vector<std::pair<double, Vec>>& out)>;

/// Fixed point of V(x) = c(x) + gamma * sum_i w_i V(x_i') for the enumerated
/// transition, solved on the grid by value iteration with frozen-transition
/// acceleration. Throws on non-convergence with the residual in the message.
GridValueFunction solve_value_enumerated(const ExpandFn& expand, const CostFn& cost,
                                         double gamma, const GridSpec& grid,
                                         const SolveOptions& opts = {},
                                         SolveStats* stats = nullptr,
                                         const std::vector<double>* warm_start = nullptr);

/// Known-dynamics cost value: V(x) = c(x) + gamma E_omega[V(f(x, pi(x)) + omega)].
GridValueFunction solve_value_grid(const std::function<Vec(const Vec&)>& next_mean,
                                   const CostFn& cost, double gamma, const GridSpec& grid,
                                   const NoiseQuadrature& quad, const SolveOptions& opts = {},
                                   SolveStats* stats = nullptr,
                                   const std::vector<double>* warm_start = nullptr);

/// Pessimistic cost value over the calibrated model set:
/// V(x) = c(x) + gamma max_eta E_omega[V(mu + beta sigma .* eta + omega)].
GridValueFunction pessimistic_value_grid(const model::CalibratedModel& model,
                                         const PolicyFn& policy, const CostFn& cost,
                                         double gamma, const GridSpec& grid,
                                         const NoiseQuadrature& quad,
                                         const EtaSearchOptions& eta_opts = {},
                                         const SolveOptions& opts = {},
                                         SolveStats* stats = nullptr,
                                         const std::vector<double>* warm_start = nullptr);

/// Monte-Carlo estimate of the pessimistic value for a fixed hallucinating
/// policy (a lower bound on the max). Returns (mean, standard error).
std::pair<double, double> mc_pessimistic_value(const model::CalibratedModel& model,
                                               const PolicyFn& policy, const PolicyFn& eta_policy,
                                               const CostFn& cost, double gamma,
                                               const NoiseModel& noise, const Vec& x0, int n,
                                               RandomSource& rng, int horizon);

/// Worst-case expected next value max_eta E[V(x')] at every grid node under
/// the given policy. One expensive sweep; reused by the drift check, the
/// certificate and its Monte-Carlo cross-check.
std::vector<double> worst_case_next_values(const GridValueFunction& v,
                                           const model::CalibratedModel& model,
                                           const PolicyFn& policy, const NoiseQuadrature& quad,
                                           const EtaSearchOptions& eta_opts = {});

/// Foster-Lyapunov drift check with the linear class alpha(s) = lambda s:
/// lambda_max = min over eligible safe nodes of
///   (V(x) - W(x)) / (V(x) - c_min_bound),
/// where W is the worst-case next value. Nodes with V(x) - c_min_bound below
/// the degeneracy tolerance are excluded and counted; nodes above level_cap
/// (when set) are outside the certified region and skipped.
struct DriftResult {
  bool holds = false;
  double lambda_max = 0.0;
  Vec worst_state;
  bool degenerate = false;   // no eligible node had a positive denominator
  int checked = 0;
  int excluded = 0;
  double c_min_bound = 0.0;
};

DriftResult check_drift(const GridValueFunction& vp, const std::vector<double>& worst_next,
                        const std::function<bool(const Vec&)>& safe, double c_min_bound,
                        std::optional<double> level_cap = std::nullopt,
                        double degenerate_tol = 1e-9);

/// Inputs packaged for the certificate: drift rate, thresholds and value
/// bounds. Throws unless the drift holds and xi < xi_bar.
struct CertInput {
  double lambda = 0.0;
  double xi = 0.0;
  double xi_bar = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
};

CertInput certify_policy(const GridValueFunction& vp, const std::vector<double>& worst_next,
                         double xi, double xi_bar, const DriftResult& drift);

}  // namespace safefilter::value
