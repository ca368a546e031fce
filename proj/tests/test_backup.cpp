#include "safefilter/backup/parametric.hpp"
#include "safefilter/model/checkpoint.hpp"
#include "safefilter/backup/robust_vi.hpp"
#include "safefilter/envs/double_integrator.hpp"
#include "safefilter/envs/pitch.hpp"
#include "safefilter/objective/objective.hpp"
#include "oracles/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace safefilter;
using namespace safefilter::backup;
using namespace safefilter::value;

namespace {

}  // namespace

TEST_CASE("robust VI with a degenerate model matches plain value iteration plus greedy") {
  envs::Environment env = envs::make_double_integrator_env();
  model::FunctionModel degenerate(env.drift, [](const Vec&, const Vec&) { return Vec::Zero(2); },
                                  1.0, 2);
  objective::ImmediateCost cost = objective::indicator_cost(env.safe);
  GridSpec grid(Vec::Constant(2, -1.5), Vec::Constant(2, 1.5), {13, 13});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(2);

  RobustViOptions opts;
  opts.solve.tol = 1e-10;
  opts.action_points_per_dim = 9;
  RobustViResult robust =
      robust_value_iteration(degenerate, cost, 0.9, grid, env.action_box, quad, opts);

  // plain minimax-free VI oracle over the same action lattice
  auto actions = action_lattice(env.action_box, 9);
  GridValueFunction v(grid, 0.0);
  for (int sweep = 0; sweep < 4000; ++sweep) {
    double residual = 0.0;
    std::vector<double> next(grid.node_count());
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      Vec x = grid.node(i);
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& u : actions) best = std::min(best, v(env.drift(x, u)));
      next[i] = cost.c(x) + 0.9 * best;
      residual = std::max(residual, std::abs(next[i] - v.values()[i]));
    }
    v.values() = next;
    if (residual <= 1e-12) break;
  }
  for (std::size_t i = 0; i < grid.node_count(); ++i)
    CHECK(robust.value.values()[i] == doctest::Approx(v.values()[i]).epsilon(1e-8));
}

TEST_CASE("robust VI matches brute-force minimax dynamic programming on interval chains") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    oracles::IntervalChain chain = oracles::random_monotone_chain(9, 3, seed);
    model::FunctionModel m = oracles::chain_interval_model(chain);
    const int n = chain.n_states();

    GridSpec grid(Vec::Zero(1), Vec::Constant(1, n - 1.0), {n});
    Box action_box(Vec::Zero(1), Vec::Constant(1, chain.n_actions() - 1.0));
    NoiseQuadrature quad = NoiseQuadrature::deterministic(1);

    RobustViOptions opts;
    opts.solve.tol = 1e-12;
    opts.action_points_per_dim = chain.n_actions();
    objective::ImmediateCost cost{
        [&chain](const Vec& x) { return chain.cost[static_cast<int>(std::lround(x[0]))]; }, 0.0,
        chain.cost.maxCoeff(), chain.cost.maxCoeff()};
    RobustViResult result =
        robust_value_iteration(m, cost, chain.gamma, grid, action_box, quad, opts);

    oracles::MinimaxDpResult oracle = oracles::interval_chain_minimax_dp(chain);
    for (int s = 0; s < n; ++s) {
      CHECK(result.value.values()[s] == doctest::Approx(oracle.value[s]).epsilon(1e-8));
      CHECK(result.policy(Vec::Constant(1, static_cast<double>(s)))[0] ==
            doctest::Approx(chain.actions[oracle.greedy[s]]).epsilon(1e-12));
    }
  }
}

TEST_CASE("robust VI ties break toward the smallest-norm action") {
  // Two actions with identical transitions: argmin must pick u = 0.
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.5 * x; };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Zero(1); }, 1.0, 1);
  objective::ImmediateCost cost{[](const Vec& x) { return std::abs(x[0]); }, 0.0, 1.0, 1.0};
  GridSpec grid(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), {9});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  RobustViOptions opts;
  opts.action_points_per_dim = 5;  // lattice {-1,-0.5,0,0.5,1}
  RobustViResult result =
      robust_value_iteration(m, cost, 0.9, grid, Box::symmetric(1, 1.0), quad, opts);
  for (const Vec& u : result.policy.actions()) CHECK(u[0] == 0.0);
}

TEST_CASE("learned safe policy dominates fixed alternatives node-wise") {
  envs::Environment env = envs::make_double_integrator_env();
  auto sigma = [](const Vec&, const Vec&) { return Vec::Constant(2, 0.02); };
  model::FunctionModel m(env.drift, sigma, 1.0, 2);
  objective::ImmediateCost cost = objective::indicator_cost(env.safe);
  GridSpec grid(Vec::Constant(2, -1.5), Vec::Constant(2, 1.5), {13, 13});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(2);

  RobustViOptions opts;
  opts.solve.tol = 1e-10;
  opts.action_points_per_dim = 9;
  RobustViResult robust = robust_value_iteration(m, cost, 0.9, grid, env.action_box, quad, opts);

  SolveOptions vopts;
  vopts.tol = 1e-10;
  PolicyFn pi_safe = [&robust](const Vec& x) { return robust.policy(x); };
  GridValueFunction v_safe =
      pessimistic_value_grid(m, pi_safe, cost.c, 0.9, grid, quad, {}, vopts);

  RandomSource rng(4);
  for (int alt = 0; alt < 5; ++alt) {
    std::vector<Vec> actions(grid.node_count());
    for (auto& u : actions) u = Vec::Constant(1, rng.uniform(-1.0, 1.0));
    TabularPolicy random_policy(grid, actions, env.action_box);
    PolicyFn pi = [&random_policy](const Vec& x) { return random_policy(x); };
    GridValueFunction v_alt = pessimistic_value_grid(m, pi, cost.c, 0.9, grid, quad, {}, vopts);
    for (std::size_t i = 0; i < grid.node_count(); ++i)
      CHECK(v_safe.values()[i] <= v_alt.values()[i] + 1e-7);
  }

  // adversary soundness: the inner max is at least the eta = 0 value
  std::vector<double> worst = worst_case_next_values(v_safe, m, pi_safe, quad, {});
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    Vec x = grid.node(i);
    model::Prediction p = m.predict(x, pi_safe(x));
    double center = v_safe(p.mu);
    CHECK(worst[i] >= center - 1e-12);
  }

  // every emitted action lies in the action box
  for (const Vec& u : robust.policy.actions()) CHECK(env.action_box.contains(u, 1e-12));
}

TEST_CASE("policy and value-grid checkpoints round-trip") {
  value::GridSpec grid(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), {5, 5});
  RandomSource rng(21);
  std::vector<Vec> actions(grid.node_count());
  for (auto& u : actions) u = Vec::Constant(1, rng.uniform(-0.9, 0.9));
  TabularPolicy tab(grid, actions, Box::symmetric(1, 1.0));
  TabularPolicy tab2 = model::load_tabular_policy(model::save_tabular_policy(tab));
  for (int i = 0; i < 20; ++i) {
    Vec x(2);
    x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    CHECK((tab(x) - tab2(x)).norm() == 0.0);
  }

  ParametricPolicy par(2, Box::symmetric(1, 0.8), {Vec::Zero(2), Vec::Ones(2)}, 2.5);
  Vec params(par.param_count());
  for (int i = 0; i < params.size(); ++i) params[i] = rng.uniform(-2.0, 2.0);
  par.set_params(params);
  ParametricPolicy par2 = model::load_parametric_policy(model::save_parametric_policy(par));
  for (int i = 0; i < 20; ++i) {
    Vec x(2);
    x << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    CHECK((par(x) - par2(x)).norm() == 0.0);
  }

  std::vector<double> values(grid.node_count());
  for (auto& v : values) v = rng.uniform(0.0, 5.0);
  value::GridValueFunction vf(grid, values);
  value::GridValueFunction vf2 = model::load_value_grid(model::save_value_grid(vf));
  CHECK(vf2.values() == vf.values());
}

TEST_CASE("parametric policy squashes into the output box") {
  ParametricPolicy policy(2, Box::symmetric(1, 0.7));
  RandomSource rng(5);
  Vec params(policy.param_count());
  for (int i = 0; i < params.size(); ++i) params[i] = rng.uniform(-10.0, 10.0);
  policy.set_params(params);
  for (int i = 0; i < 100; ++i) {
    Vec x(2);
    x << rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0);
    CHECK(std::abs(policy(x)[0]) <= 0.7);
  }
}

TEST_CASE("cem minimax on a zero cost returns without error") {
  auto mean = [](const Vec& x, const Vec& u) -> Vec { return Vec::Constant(1, 0.5 * x[0] + 0.1 * u[0]); };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Constant(1, 0.01); }, 1.0,
                         1);
  objective::ImmediateCost zero{[](const Vec&) { return 0.0; }, 0.0, 0.0, 0.0};
  ParametricPolicy policy_proto(1, Box::symmetric(1, 1.0));
  ParametricPolicy eta_proto(1, Box::unit(1));
  MinimaxCemOptions opts;
  opts.cem.particles = 16;
  opts.outer_rounds = 1;
  opts.horizon = 10;
  opts.rollouts_per_eval = 2;
  RandomSource rng(6);
  auto x0 = [](RandomSource& r) { return Vec::Constant(1, r.uniform(-1.0, 1.0)); };
  MinimaxCemResult result = cem_minimax_policy(m, zero, 0.9, x0, NoiseModel::zero(1),
                                               policy_proto, eta_proto, opts, rng);
  CHECK(result.adversarial_value == 0.0);
}

TEST_CASE("cem minimax reaches the grid optimum on a 1-D linear system") {
  // x' = 0.9 x + 0.2 u with interval uncertainty; quadratic-in-state cost.
  auto mean = [](const Vec& x, const Vec& u) -> Vec {
    return Vec::Constant(1, 0.9 * x[0] + 0.2 * u[0]);
  };
  auto sigma = [](const Vec&, const Vec&) { return Vec::Constant(1, 0.02); };
  model::FunctionModel m(mean, sigma, 1.0, 1);
  objective::ImmediateCost cost{[](const Vec& x) { return x[0] * x[0]; }, 0.0, 4.0, 4.0};
  Box action_box = Box::symmetric(1, 1.0);
  double gamma = 0.9;

  GridSpec grid(Vec::Constant(1, -2.0), Vec::Constant(1, 2.0), {81});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  RobustViOptions opts;
  opts.solve.tol = 1e-10;
  opts.action_points_per_dim = 33;
  RobustViResult reference = robust_value_iteration(m, cost, gamma, grid, action_box, quad, opts);

  Vec x0 = Vec::Constant(1, 1.0);
  MinimaxCemOptions copts;
  copts.cem.particles = 48;
  copts.outer_rounds = 5;
  copts.policy_steps = 6;
  copts.adversary_steps = 2;
  copts.horizon = 120;
  copts.rollouts_per_eval = 1;
  ParametricPolicy policy_proto(1, action_box);
  ParametricPolicy eta_proto(1, Box::unit(1));
  RandomSource rng(7);
  auto x0_sampler = [&](RandomSource&) { return x0; };
  MinimaxCemResult learned = cem_minimax_policy(m, cost, gamma, x0_sampler, NoiseModel::zero(1),
                                                policy_proto, eta_proto, copts, rng);

  double v_ref = reference.value(x0);
  CHECK(learned.adversarial_value <= 1.10 * v_ref + 1e-9);
  CHECK(learned.adversarial_value >= 0.80 * v_ref - 1e-9);
}

TEST_CASE("cem minimax backup keeps the pitch angle non-positive on zero-noise roll-outs") {
  envs::PitchParams params;
  params.noise_std = 0.0;
  envs::Environment env = envs::make_pitch_env(params);
  Vec floor(3);
  floor << 2e-4, 5e-5, 2e-4;
  model::OraclePerturbedModel m(env.drift, floor, 2.0);

  objective::ImmediateCost cost =
      objective::margin_cost(env.safe, envs::pitch_signed_distance(900.0), 40.0);
  ParametricPolicy policy_proto(3, env.action_box);
  ParametricPolicy eta_proto(3, Box::unit(3));
  MinimaxCemOptions opts;
  opts.cem.particles = 40;
  opts.outer_rounds = 4;
  opts.policy_steps = 5;
  opts.adversary_steps = 1;
  opts.horizon = 150;
  opts.rollouts_per_eval = 2;
  RandomSource rng(8);
  envs::Environment env_copy = env;
  auto x0_sampler = [env_copy](RandomSource& r) { return envs::initial_state(env_copy, r); };
  MinimaxCemResult learned = cem_minimax_policy(m, cost, 0.99, x0_sampler, env.noise,
                                                policy_proto, eta_proto, opts, rng);

  PolicyFn pi = [&learned](const Vec& x) { return learned.policy(x); };
  int clean = 0;
  for (int run = 0; run < 100; ++run) {
    RandomSource roll_rng(900 + run);
    Trajectory traj = rollout(env.step_fn(), pi, env.default_initial_state, 150, roll_rng);
    bool ok = true;
    for (const Vec& x : traj.states) ok = ok && (x[2] <= 0.0);
    clean += ok ? 1 : 0;
  }
  CHECK(clean == 100);
}
