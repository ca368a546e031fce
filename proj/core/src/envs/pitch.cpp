#include "safefilter/envs/pitch.hpp"

#include <cmath>

namespace safefilter::envs {

Vec step(const Environment& env, const Vec& x, const Vec& u, RandomSource& rng) {
  require_finite(x, "step: x");
  require_finite(u, "step: u");
  Vec xc = x;
  Vec uc = u;
  if (!env.state_box.contains(x) || !env.action_box.contains(u)) {
    xc = env.state_box.clamp(x);
    uc = env.action_box.clamp(u);
    ++(*env.clamp_count);
  }
  return env.drift(xc, uc) + env.noise.sample(rng);
}

bool safe_indicator(const Environment& env, const Vec& x) {
  require_finite(x, "safe_indicator: x");
  return env.safe(x);
}

Vec initial_state(const Environment& env, RandomSource& rng) {
  Vec x0 = env.default_initial_state;
  if (env.init_jitter_std > 0.0) {
    for (Eigen::Index i = 0; i < x0.size(); ++i)
      x0[i] += env.init_jitter_std * rng.normal();
  }
  return x0;
}

StepFn Environment::step_fn() const {
  Environment copy = *this;
  return [copy](const Vec& x, const Vec& u, RandomSource& rng) {
    return step(copy, x, u, rng);
  };
}

std::pair<Mat, Vec> pitch_discrete_matrices(double dt) {
  Mat a_cont(3, 3);
  a_cont << -0.313, 56.7, 0.0,
            -0.0139, -0.426, 0.0,
             0.0, 56.7, 0.0;
  Vec b_cont(3);
  b_cont << 0.232, 0.0203, 0.0;
  Mat a = Mat::Identity(3, 3) + dt * a_cont;
  Vec b = dt * b_cont;
  return {a, b};
}

Environment make_pitch_env(const PitchParams& params) {
  auto [a, b] = pitch_discrete_matrices(params.dt);

  Environment env;
  env.name = "pitch";
  env.dt = params.dt;
  // State bounds wide enough that nominal roll-outs never hit them.
  Vec lo(3), hi(3);
  lo << -2.0, -0.5, -2.0;
  hi << 2.0, 0.5, 2.0;
  env.state_box = Box(lo, hi);
  env.action_box = Box::symmetric(1, params.action_limit);
  env.noise = NoiseModel::gaussian(Vec::Constant(3, params.noise_std));
  env.drift = [a, b](const Vec& x, const Vec& u) -> Vec { return a * x + b * u[0]; };
  env.safe = [](const Vec& x) { return x[2] <= 0.0; };
  double u_sign = params.reward_u_sign;
  env.reward = [u_sign](const Vec& x, const Vec& u) {
    return -2.0 * x[2] * x[2] + u_sign * 0.02 * u[0] * u[0];
  };
  env.default_initial_state = Vec::Zero(3);
  env.default_initial_state[2] = params.theta_start;
  env.init_jitter_std = params.init_jitter_std;
  return env;
}

std::function<double(const Vec&)> pitch_signed_distance(double momentum_coeff,
                                                        double alpha_coeff) {
  return [momentum_coeff, alpha_coeff](const Vec& x) {
    double alpha = x[0];
    double q = x[1];
    double theta = x[2];
    double nose_down = std::max(0.0, -alpha);
    return std::max(theta, theta + momentum_coeff * q * std::abs(q) +
                               alpha_coeff * nose_down * nose_down);
  };
}

}  // namespace safefilter::envs
