#pragma once

#include "safefilter/common.hpp"
#include "safefilter/geometry.hpp"
#include "safefilter/noise.hpp"
#include "safefilter/trajectory.hpp"

#include <functional>
#include <memory>
#include <string>

namespace safefilter::envs {

/// Ground-truth environment description. The deterministic transition is
/// `drift`; `step` adds one process-noise draw. Environments are immutable
/// apart from a clamp diagnostic counter.
struct Environment {
  std::string name;
  Box state_box;
  Box action_box;
  NoiseModel noise;
  std::function<Vec(const Vec& x, const Vec& u)> drift;
  std::function<bool(const Vec& x)> safe;
  std::function<double(const Vec& x, const Vec& u)> reward;
  Vec default_initial_state;
  double init_jitter_std = 0.0;  // gaussian jitter on the initial state, off by default
  double dt = 0.0;

  // Counts soft clamps of out-of-box inputs to step(); diagnostic only.
  std::shared_ptr<std::size_t> clamp_count = std::make_shared<std::size_t>(0);

  int state_dim() const { return static_cast<int>(state_box.dim()); }
  int action_dim() const { return static_cast<int>(action_box.dim()); }

  StepFn step_fn() const;
};

/// One stochastic transition. Out-of-box (x, u) are clamped and counted.
Vec step(const Environment& env, const Vec& x, const Vec& u, RandomSource& rng);

/// True iff x lies in the environment's safe set.
bool safe_indicator(const Environment& env, const Vec& x);

/// Initial state; adds configurable gaussian jitter when enabled.
Vec initial_state(const Environment& env, RandomSource& rng);

}  // namespace safefilter::envs
