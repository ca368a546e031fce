#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"
#include "safefilter/trajectory.hpp"
#include "safefilter/value/grid.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace safefilter::cert {

/// Which transition-bound formulas to use. `Derived` re-derives every entry
/// from the single-step level-transition lemma (sound under the enumeration
/// oracle); `Printed` reproduces the published case formulas verbatim for
/// comparison.
enum class BoundVariant { Derived, Printed };

struct TransitionBounds {
  double lower = 0.0;
  double upper = 1.0;
};

/// Single-step bounds on P(V(x') < theta2) given E[V(x')] <= theta1 and
/// v_min <= V <= v_max. The lower bound (theta2-theta1)/(theta2-v_min) is
/// sharp (two-atom witness at {v_min, theta2}). Under mean-only information
/// no upper bound below 1 is valid, so the derived variant returns 1; the
/// printed variant returns (theta2-theta1)/(v_max-theta2) clamped.
TransitionBounds level_transition_bounds(double v_min, double v_max, double theta1,
                                         double theta2,
                                         BoundVariant variant = BoundVariant::Derived);

/// Nested level thresholds theta^1 > ... > theta^{M+1} between xi and xi_bar,
/// built by the geometric recursion theta^{i-1} = theta^i + vartheta *
/// alpha(theta^i - v_min) with linear alpha(s) = lambda s; theta^{M+1} solves
/// theta - (1 - vartheta) alpha(theta - v_min) = xi by bisection.
struct LevelLadder {
  std::vector<double> thresholds;  // descending, size M+1 with M >= 1
  double lambda = 0.0;
  double vartheta = 0.0;
  double xi = 0.0;
  double xi_bar = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  BoundVariant variant = BoundVariant::Derived;

  int levels() const { return static_cast<int>(thresholds.size()) - 1; }
  /// Bound on the worst expected next value from anywhere inside the level-j
  /// sub-level set: theta^j - lambda (theta^{j+1} - v_min). Equals xi at j=M.
  double mean_bound(int level) const;
};

LevelLadder build_level_ladder(double alpha_lambda, double xi, double xi_bar, double v_min,
                               double vartheta, double v_max = 0.0,
                               BoundVariant variant = BoundVariant::Derived,
                               int max_levels = 200);

/// M x M matrix of transition-probability lower bounds between levels plus
/// the augmented (M+1) x (M+1) left-stochastic matrix whose first state is
/// the absorbing escape state.
struct TransitionBoundMatrix {
  Mat p;          // p(i-1, j-1) bounds the level j -> level i transition
  Mat augmented;  // left stochastic, column = current state, state 0 = escape
  bool clamp_warning = false;  // clamping moved some entry by more than 0.5
};

TransitionBoundMatrix build_transition_matrix(const LevelLadder& ladder);

/// K-step escape probability of the augmented chain started at the innermost
/// level: [1 0 ... 0] A^K [0 ... 0 1]^T.
double escape_probability(const Mat& augmented, int horizon);

struct McCrossCheck {
  double rate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int rollouts = 0;
};

struct CertificateReport {
  double delta_fl = 0.0;       // min of the two routes below
  double delta_matrix = 0.0;   // K-th power of the augmented level chain
  double delta_ville = 1.0;    // supermartingale maximal inequality + restarts
  int horizon = 0;
  LevelLadder ladder;
  TransitionBoundMatrix matrix;
  double delta_f = 0.0;      // model-set failure probability, user supplied
  double delta_total = 0.0;  // delta_fl + delta_f - delta_fl * delta_f
  std::optional<McCrossCheck> mc_crosscheck;

  std::string to_json() const;
};

/// Maximal-inequality escape bound. When the one-step drift slack
/// epsilon >= max over the certified region of (max_eta E[V(x')] - V(x))
/// has been verified, M_k = V_k - v_min + (K - k) epsilon is a nonnegative
/// supermartingale until escape, so
///   P(exists k <= K: V_k >= xi_bar) <= (xi - v_min + K epsilon)/(xi_bar - v_min).
/// Pass epsilon empty when the slack has not been measured.
double supermartingale_escape_bound(double xi, double xi_bar, double v_min, int horizon,
                                    std::optional<double> epsilon = std::nullopt);

/// Certificate for a fixed ladder: builds the bound matrix, raises the
/// augmented chain to the K-th power, takes the minimum with the
/// supermartingale route and composes with delta_f.
CertificateReport delta_fl(const LevelLadder& ladder, int horizon, double delta_f = 0.0,
                           std::optional<double> drift_slack = std::nullopt);

/// Evaluates the ladder over a vartheta grid and returns the report with the
/// smallest delta_fl (each vartheta independently yields a valid bound).
/// Configurations whose ladder degenerates (M = 0) are skipped. Pass the
/// measured one-step drift slack to enable the supermartingale route.
CertificateReport best_certificate(double alpha_lambda, double xi, double xi_bar, double v_min,
                                   double v_max, int horizon, double delta_f = 0.0,
                                   const std::vector<double>& vartheta_grid =
                                       {0.5, 0.2, 0.1, 0.05, 0.02},
                                   BoundVariant variant = BoundVariant::Derived,
                                   std::optional<double> drift_slack = std::nullopt);

/// Node-level soundness check of a ladder against a solved value function:
/// for every grid node with V < theta^j the worst-case expected next value
/// must stay below the level-j mean bound. Returns the first failing level or
/// nullopt when every level verifies.
std::optional<int> verify_ladder_on_grid(const LevelLadder& ladder,
                                         const std::vector<double>& v_nodes,
                                         const std::vector<double>& worst_next_nodes);

/// 95% Wilson score interval for a binomial rate.
std::pair<double, double> wilson_interval(int successes, int trials, double z = 1.959963984540054);

/// Empirical K-step escape rate: fraction of roll-outs from x0 whose value
/// exceeds xi_bar at any step k = 1..K, with the Wilson interval.
McCrossCheck mc_delta_estimate(const StepFn& dynamics, const PolicyFn& policy,
                               const std::function<double(const Vec&)>& value, double xi_bar,
                               const std::vector<Vec>& x0_set, int horizon, int n_rollouts,
                               RandomSource& rng);

}  // namespace safefilter::cert
