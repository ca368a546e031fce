#pragma once

#include "safefilter/envs/environment.hpp"

namespace safefilter::envs {

/// Airplane pitch control. State (alpha attack angle, q pitch rate, theta
/// pitch angle), scalar elevator action. Linear short-period dynamics
///   alpha' = -0.313 alpha + 56.7 q + 0.232 u
///   q'     = -0.0139 alpha - 0.426 q + 0.0203 u
///   theta' = 56.7 q
/// discretized by forward Euler. Safe set: theta <= 0.
struct PitchParams {
  double dt = 0.02;
  double noise_std = 1e-3;        // per state component
  double action_limit = 1.4;      // |elevator| bound, radians
  double reward_u_sign = -1.0;    // r = -2 theta^2 + sign * 0.02 u^2
  double init_jitter_std = 0.0;
  double theta_start = -0.2;
};

Environment make_pitch_env(const PitchParams& params = {});

/// Discretized (A, B) of the pitch model for the given dt.
std::pair<Mat, Vec> pitch_discrete_matrices(double dt);

/// Momentum-aware signed distance to the unsafe set {theta > 0}:
///   max(theta, theta + momentum_coeff * q|q| + alpha_coeff * max(0,-alpha)^2).
/// Positive inside the unsafe set; elevated on safe states whose pitch rate
/// or nose-down attack angle makes a future crossing likely, which is what
/// cost shaping for drift verification needs.
std::function<double(const Vec&)> pitch_signed_distance(double momentum_coeff,
                                                        double alpha_coeff = 0.0);

}  // namespace safefilter::envs
