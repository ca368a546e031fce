#pragma once

#include "safefilter/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace safefilter::harness {

/// Experiment configuration. Parsing is strict: unknown keys anywhere in the
/// document are rejected, and the cross-field invariants (gamma in (0,1),
/// xi < xi_bar, positive counts) are checked at load time.
struct ExperimentConfig {
  std::uint64_t seed = 0;

  struct Env {
    std::string name = "pitch";  // pitch | double_integrator
    std::optional<double> dt;
    std::optional<double> noise_std;
    std::optional<double> action_limit;
    double reward_u_sign = -1.0;  // pitch: +1 reproduces the published reward verbatim
    double init_jitter_std = 0.0;
    double position_limit = 1.0;  // double integrator
  } env;

  struct Model {
    std::string type = "oracle";  // oracle | ensemble
    double beta = 2.0;
    std::vector<double> sigma_floor;     // oracle; per-env default when empty
    double bias_fraction = 0.5;          // oracle bias amplitude as a fraction of beta*sigma_floor
    int members = 5;
    int hidden_layers = 2;
    int hidden_width = 32;
    double lr = 5e-4;
    double weight_decay = 1e-4;
    int pretrain_iters = 100;
    int refit_iters = 20;
    std::uint64_t buffer_capacity = 100000;
    double ensemble_sigma_floor = 1e-6;
    double beta_quantile = 0.99;
    bool beta_from_truth = true;
  } model;

  struct Objective {
    std::string cost = "margin";  // margin | indicator
    double slope = 60.0;
    double momentum_coeff = 0.0;  // pitch margin shaping (pitch-rate lookahead)
    double alpha_coeff = 0.0;     // pitch margin shaping (nose-down attack angle)
    double gamma = 0.99;
    double xi_fraction = 0.5;
    std::optional<double> xi_absolute;
    std::string c_min_mode = "analytic";  // analytic | grid
  } objective;

  struct Grid {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<int> points;
  } grid;

  struct Value {
    double tol = 1e-8;
    int max_sweeps = 200000;
    int gh_points = 5;
    int mc_noise_samples = 64;
    bool eta_refine = true;
    int eta_refine_points = 17;
  } value;

  struct Backup {
    std::string method = "robust_vi";  // robust_vi | cem
    int action_points = 17;
    int cem_population = 64;
    double cem_elite_fraction = 0.125;
    int cem_policy_steps = 5;
    int cem_adversary_steps = 1;
    int cem_outer_rounds = 6;
    int cem_horizon = 120;
    int cem_rollouts = 8;
  } backup;

  struct Filter {
    bool enabled = true;
    int particles = 1000;
    int iterations = 5;
    double elite_fraction = 0.1;
    double init_std_frac = 0.25;
  } filter;

  struct Cert {
    bool enabled = true;
    int horizon = 100;
    std::vector<double> vartheta_grid = {0.5, 0.2, 0.1, 0.05, 0.02};
    double delta_f = 0.0;
    std::string variant = "derived";  // derived | printed
    int mc_rollouts = 0;
    // Nodes with Vp below c_min + drift_band * (xi - c_min) are treated as
    // degenerate in the rate search; the ladder verification still checks
    // them directly.
    double drift_band = 0.02;
  } cert;

  struct Episodes {
    int warmup = 10;
    int count = 30;
    int horizon = 300;
  } episodes;

  struct Planner {
    int particles = 128;
    int iterations = 4;
    int horizon = 20;
    double elite_fraction = 0.1;
    double init_std_frac = 0.5;
  } planner;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_json_text() const;  // canonical: sorted keys, every field explicit
  void save(const std::string& path) const;

  void validate() const;

  /// xi_bar implied by the configured cost family (analytic c_min bound).
  double xi_bar() const;
  double xi() const;
};

}  // namespace safefilter::harness
