#include "safefilter/envs/double_integrator.hpp"

#include <cmath>

namespace safefilter::envs {

Environment make_double_integrator_env(const DoubleIntegratorParams& params) {
  Environment env;
  env.name = "double_integrator";
  env.dt = params.dt;
  Vec lo(2), hi(2);
  lo << -3.0, -3.0;
  hi << 3.0, 3.0;
  env.state_box = Box(lo, hi);
  env.action_box = Box::symmetric(1, params.accel_limit);
  env.noise = params.noise_std > 0.0
                  ? NoiseModel::gaussian(Vec::Constant(2, params.noise_std))
                  : NoiseModel::zero(2);
  double dt = params.dt;
  env.drift = [dt](const Vec& x, const Vec& u) -> Vec {
    Vec next(2);
    next[0] = x[0] + dt * x[1] + 0.5 * dt * dt * u[0];
    next[1] = x[1] + dt * u[0];
    return next;
  };
  double p_lim = params.position_limit;
  env.safe = [p_lim](const Vec& x) { return std::abs(x[0]) <= p_lim; };
  env.reward = [](const Vec& x, const Vec& u) {
    return -(x[0] * x[0] + 0.1 * x[1] * x[1] + 0.01 * u[0] * u[0]);
  };
  env.default_initial_state = Vec(2);
  env.default_initial_state << -1.0, 0.0;
  return env;
}

}  // namespace safefilter::envs
