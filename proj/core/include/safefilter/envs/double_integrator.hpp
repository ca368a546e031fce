#pragma once

#include "safefilter/envs/environment.hpp"

namespace safefilter::envs {

/// Double integrator with exact zero-order-hold discretization:
///   p' = p + dt v + dt^2/2 u,  v' = v + dt u.
/// Safe set: |p| <= position_limit.
struct DoubleIntegratorParams {
  double dt = 0.1;
  double noise_std = 0.0;
  double accel_limit = 1.0;
  double position_limit = 1.0;
};

Environment make_double_integrator_env(const DoubleIntegratorParams& params = {});

}  // namespace safefilter::envs
