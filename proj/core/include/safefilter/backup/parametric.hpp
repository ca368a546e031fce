#pragma once

#include "safefilter/backup/cem.hpp"
#include "safefilter/model/calibrated.hpp"
#include "safefilter/noise.hpp"
#include "safefilter/objective/cost.hpp"

#include <vector>

namespace safefilter::backup {

/// Linear-in-features policy with tanh squashing into the output box, so the
/// emitted vector always lies in the box. Features are affine in the state,
/// optionally extended with radial basis bumps.
class ParametricPolicy {
 public:
  ParametricPolicy() = default;
  ParametricPolicy(int state_dim, Box out_box, std::vector<Vec> rbf_centers = {},
                   double rbf_gamma = 1.0);

  int param_count() const { return static_cast<int>(out_dim_ * feature_count_); }
  const Vec& params() const { return params_; }
  void set_params(Vec params);

  Vec operator()(const Vec& x) const;

  const Box& out_box() const { return out_box_; }
  int state_dim() const { return state_dim_; }
  const std::vector<Vec>& rbf_centers() const { return rbf_centers_; }
  double rbf_gamma() const { return rbf_gamma_; }

 private:
  Vec features(const Vec& x) const;

  int state_dim_ = 0;
  int out_dim_ = 0;
  int feature_count_ = 0;
  Box out_box_;
  std::vector<Vec> rbf_centers_;
  double rbf_gamma_ = 1.0;
  Vec params_;  // row-major (out, feature)
};

struct MinimaxCemOptions {
  CemOptions cem;              // population 64, elite 0.125, 30 iterations
  int policy_steps = 5;        // policy CEM rounds per adversary round
  int adversary_steps = 1;
  int outer_rounds = 6;
  int rollouts_per_eval = 8;   // start states per objective evaluation
  int horizon = 120;
  double param_init_std = 0.5;
};

struct MinimaxCemResult {
  ParametricPolicy policy;
  ParametricPolicy eta_policy;
  double adversarial_value = 0.0;  // MC pessimistic cost of the returned policy
};

/// Alternating population search: minimize the Monte-Carlo pessimistic cost
/// over policy parameters against the current adversary, then maximize over
/// the hallucinating-policy parameters. Common random numbers across the
/// candidates of one round keep comparisons fair.
MinimaxCemResult cem_minimax_policy(const model::CalibratedModel& model,
                                    const objective::ImmediateCost& cost, double gamma,
                                    const std::function<Vec(RandomSource&)>& x0_sampler,
                                    const NoiseModel& noise, const ParametricPolicy& policy_proto,
                                    const ParametricPolicy& eta_proto,
                                    const MinimaxCemOptions& opts, RandomSource& rng);

}  // namespace safefilter::backup
