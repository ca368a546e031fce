#include "safefilter/envs/chain_mdp.hpp"
#include "safefilter/envs/double_integrator.hpp"
#include "safefilter/objective/objective.hpp"
#include "safefilter/value/solver.hpp"
#include "oracles/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace safefilter;
using namespace safefilter::value;

namespace {

GridSpec line_grid(double lo, double hi, int points) {
  return GridSpec(Vec::Constant(1, lo), Vec::Constant(1, hi), {points});
}

// Chain embedded on the integer line: exact enumerated transitions.
ExpandFn chain_expand(const envs::DiscreteChainMDP& chain, int action = 0) {
  return [&chain, action](const Vec& x, std::vector<std::pair<double, Vec>>& out) {
    int s = static_cast<int>(std::lround(x[0]));
    const Mat& p = chain.transition(action);
    for (int sp = 0; sp < chain.n_states(); ++sp)
      if (p(s, sp) > 0.0) out.emplace_back(p(s, sp), Vec::Constant(1, static_cast<double>(sp)));
  };
}

envs::DiscreteChainMDP random_chain(int n, std::uint64_t seed) {
  RandomSource gen(seed);
  Mat p(n, n);
  for (int s = 0; s < n; ++s) {
    double total = 0.0;
    for (int sp = 0; sp < n; ++sp) {
      p(s, sp) = gen.uniform(0.01, 1.0);
      total += p(s, sp);
    }
    p.row(s) /= total;
  }
  return envs::DiscreteChainMDP({p}, {n - 1});
}

}  // namespace

TEST_CASE("quadrature: weights sum to one and match the first two moments") {
  NoiseModel g = NoiseModel::gaussian(Vec::Constant(2, 0.3));
  NoiseQuadrature quad = NoiseQuadrature::for_noise(g, 5);
  double wsum = 0.0;
  Vec mean = Vec::Zero(2), var = Vec::Zero(2);
  for (std::size_t q = 0; q < quad.size(); ++q) {
    wsum += quad.weights[q];
    mean += quad.weights[q] * quad.nodes[q];
    var += quad.weights[q] * quad.nodes[q].cwiseProduct(quad.nodes[q]);
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean.norm() < 1e-12);
  CHECK(var[0] == doctest::Approx(0.09).epsilon(1e-10));

  // 5-node Gauss-Hermite integrates x^4 exactly: E[x^4] = 3 sigma^4
  NoiseQuadrature quad1 = NoiseQuadrature::for_noise(NoiseModel::gaussian(Vec::Constant(1, 2.0)), 5);
  double m4 = 0.0;
  for (std::size_t q = 0; q < quad1.size(); ++q)
    m4 += quad1.weights[q] * std::pow(quad1.nodes[q][0], 4);
  CHECK(m4 == doctest::Approx(3.0 * 16.0).epsilon(1e-10));

  NoiseQuadrature zero = NoiseQuadrature::for_noise(NoiseModel::zero(3), 5);
  CHECK(zero.size() == 1);
  CHECK(zero.weights[0] == 1.0);

  NoiseQuadrature uni =
      NoiseQuadrature::for_noise(NoiseModel::uniform(Vec::Constant(1, 0.5)), 5, 64);
  double u_mean = 0.0, u_var = 0.0, u_wsum = 0.0;
  for (std::size_t q = 0; q < uni.size(); ++q) {
    u_wsum += uni.weights[q];
    u_mean += uni.weights[q] * uni.nodes[q][0];
    u_var += uni.weights[q] * uni.nodes[q][0] * uni.nodes[q][0];
  }
  CHECK(u_wsum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(u_mean) < 1e-12);
  CHECK(u_var == doctest::Approx(0.25 / 3.0).epsilon(1e-10));
}

TEST_CASE("grid interpolation: exact at nodes, multilinear inside, clamped outside") {
  GridSpec grid(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), {5, 5});
  std::vector<double> values(grid.node_count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    Vec x = grid.node(i);
    values[i] = 2.0 * x[0] - 3.0 * x[1] + 0.5;  // linear functions interpolate exactly
  }
  GridValueFunction v(grid, values);
  for (std::size_t i = 0; i < values.size(); ++i) CHECK(v(grid.node(i)) == values[i]);

  RandomSource rng(1);
  for (int i = 0; i < 200; ++i) {
    Vec x(2);
    x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    CHECK(v(x) == doctest::Approx(2.0 * x[0] - 3.0 * x[1] + 0.5).epsilon(1e-12));
  }
  Vec outside(2);
  outside << 5.0, -7.0;
  Vec edge(2);
  edge << 1.0, -1.0;
  CHECK(v(outside) == doctest::Approx(v(edge)).epsilon(1e-12));
}

TEST_CASE("solve_value_grid fixed points: zero cost and constant cost") {
  GridSpec grid = line_grid(-1.0, 1.0, 9);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  auto next = [](const Vec& x) -> Vec { return 0.5 * x; };

  SolveStats stats;
  GridValueFunction v0 =
      solve_value_grid(next, [](const Vec&) { return 0.0; }, 0.99, grid, quad, {}, &stats);
  CHECK(v0.max_value() == 0.0);
  CHECK(v0.min_value() == 0.0);

  GridValueFunction v1 =
      solve_value_grid(next, [](const Vec&) { return 1.0; }, 0.99, grid, quad);
  for (double value : v1.values()) CHECK(value == doctest::Approx(100.0).epsilon(1e-7));
}

TEST_CASE("solve_value matches the exact chain linear solve") {
  envs::DiscreteChainMDP chain = random_chain(6, 21);
  Vec cost(6);
  cost << 0.0, 0.1, 0.0, 0.3, 0.0, 1.0;
  double gamma = 0.9;
  Vec exact = oracles::chain_exact_value(chain.transition(0), cost, gamma);

  GridSpec grid = line_grid(0.0, 5.0, 6);
  SolveOptions opts;
  opts.tol = 1e-12;
  GridValueFunction v = solve_value_enumerated(
      chain_expand(chain),
      [&cost](const Vec& x) { return cost[static_cast<int>(std::lround(x[0]))]; }, gamma, grid,
      opts);
  for (int s = 0; s < 6; ++s)
    CHECK(v.values()[s] == doctest::Approx(exact[s]).epsilon(1e-8));
}

TEST_CASE("value iteration residuals contract by gamma") {
  envs::DiscreteChainMDP chain = random_chain(5, 33);
  Vec cost(5);
  cost << 0.2, 0.0, 0.5, 0.0, 1.0;
  double gamma = 0.85;
  GridSpec grid = line_grid(0.0, 4.0, 5);
  SolveOptions opts;
  opts.tol = 1e-10;
  SolveStats stats;
  solve_value_enumerated(chain_expand(chain),
                         [&cost](const Vec& x) { return cost[static_cast<int>(std::lround(x[0]))]; },
                         gamma, grid, opts, &stats);
  REQUIRE(stats.residual_log.size() > 3);
  for (std::size_t k = 1; k < stats.residual_log.size(); ++k)
    CHECK(stats.residual_log[k] <= gamma * stats.residual_log[k - 1] + 1e-15);
}

TEST_CASE("pessimistic value with sigma = 0 equals the nominal value exactly") {
  envs::Environment env = envs::make_double_integrator_env();
  model::FunctionModel degenerate(env.drift, [](const Vec&, const Vec&) { return Vec::Zero(2); },
                                  2.0, 2);
  auto safe = env.safe;
  objective::ImmediateCost cost = objective::indicator_cost(safe);
  PolicyFn brake = [](const Vec& x) { return Vec::Constant(1, -0.5 * x[1] - 0.4 * x[0]); };

  GridSpec grid(Vec::Constant(2, -1.5), Vec::Constant(2, -1.5).cwiseAbs(), {17, 17});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(2);
  SolveOptions opts;
  opts.tol = 1e-10;

  GridValueFunction nominal = solve_value_grid(
      [&](const Vec& x) { return env.drift(x, brake(x)); }, cost.c, 0.9, grid, quad, opts);
  GridValueFunction pessimistic =
      pessimistic_value_grid(degenerate, brake, cost.c, 0.9, grid, quad, {}, opts);
  for (std::size_t i = 0; i < nominal.values().size(); ++i)
    CHECK(pessimistic.values()[i] == nominal.values()[i]);
}

TEST_CASE("pessimism: uncertainty never lowers the value, and grows with beta") {
  envs::Environment env = envs::make_double_integrator_env();
  auto sigma = [](const Vec&, const Vec&) { return Vec::Constant(2, 0.05); };
  objective::ImmediateCost cost = objective::indicator_cost(env.safe);
  PolicyFn brake = [](const Vec& x) { return Vec::Constant(1, -0.5 * x[1] - 0.4 * x[0]); };
  GridSpec grid(Vec::Constant(2, -1.5), Vec::Constant(2, 1.5), {17, 17});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(2);
  SolveOptions opts;
  opts.tol = 1e-10;

  GridValueFunction nominal = solve_value_grid(
      [&](const Vec& x) { return env.drift(x, brake(x)); }, cost.c, 0.9, grid, quad, opts);

  model::FunctionModel small(env.drift, sigma, 0.5, 2);
  model::FunctionModel large(env.drift, sigma, 1.5, 2);
  GridValueFunction vp_small = pessimistic_value_grid(small, brake, cost.c, 0.9, grid, quad, {}, opts);
  GridValueFunction vp_large = pessimistic_value_grid(large, brake, cost.c, 0.9, grid, quad, {}, opts);

  for (std::size_t i = 0; i < nominal.values().size(); ++i) {
    CHECK(vp_small.values()[i] >= nominal.values()[i] - 1e-8);
    CHECK(vp_large.values()[i] >= vp_small.values()[i] - 1e-8);
  }
}

TEST_CASE("1-D inner maximization is exact for monotone values") {
  // Increasing cost in x: V is increasing, so the adversary pushes right.
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.7 * x; };
  auto sigma = [](const Vec&, const Vec&) { return Vec::Constant(1, 0.2); };
  model::FunctionModel m(mean, sigma, 1.0, 1);
  CostFn cost = [](const Vec& x) { return 0.5 * (x[0] + 1.0); };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  GridSpec grid = line_grid(-1.0, 1.0, 21);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  SolveOptions opts;
  opts.tol = 1e-11;

  GridValueFunction vp = pessimistic_value_grid(m, pol, cost, 0.9, grid, quad, {}, opts);

  // Oracle: plain value iteration with the adversary pinned at the right
  // vertex eta = +1.
  GridValueFunction oracle = solve_value_grid(
      [&](const Vec& x) -> Vec { return 0.7 * x + Vec::Constant(1, 0.2); }, cost, 0.9, grid,
      quad, opts);
  for (std::size_t i = 0; i < vp.values().size(); ++i)
    CHECK(vp.values()[i] == doctest::Approx(oracle.values()[i]).epsilon(1e-9));

  // V is increasing, so the recorded per-node worst case picks eta = +1.
  Vec eta;
  worst_case_next_value(vp, Vec::Zero(1), Vec::Constant(1, 0.2), quad, {}, &eta);
  CHECK(eta[0] == doctest::Approx(1.0));
}

TEST_CASE("mc_pessimistic_value under a degenerate model matches the nominal MC cost") {
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.5 * x; };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Zero(1); }, 1.0, 1);
  CostFn cost = [](const Vec& x) { return x[0] * x[0]; };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  PolicyFn eta0 = [](const Vec&) { return Vec::Zero(1); };
  NoiseModel no_noise = NoiseModel::zero(1);
  RandomSource rng(5);
  auto [mc, se] = mc_pessimistic_value(m, pol, eta0, cost, 0.9, no_noise, Vec::Constant(1, 1.0),
                                       4, rng, 80);
  // deterministic contraction: sum gamma^k 0.25^k = 1/(1-0.225)
  CHECK(se == 0.0);
  CHECK(mc == doctest::Approx(1.0 / (1.0 - 0.225)).epsilon(1e-8));
}

TEST_CASE("mc estimates under any admissible eta stay below the grid pessimistic value") {
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.7 * x; };
  auto sigma = [](const Vec&, const Vec&) { return Vec::Constant(1, 0.15); };
  model::FunctionModel m(mean, sigma, 1.0, 1);
  CostFn cost = [](const Vec& x) { return 0.5 * (x[0] + 1.0); };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  GridSpec grid = line_grid(-1.0, 1.0, 41);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  SolveOptions opts;
  opts.tol = 1e-11;
  GridValueFunction vp = pessimistic_value_grid(m, pol, cost, 0.9, grid, quad, {}, opts);

  Vec x0 = Vec::Constant(1, 0.25);
  NoiseModel no_noise = NoiseModel::zero(1);
  double interp_margin = 1e-3;

  // adversarial eta from the grid argmax: within 3 SE + interpolation error
  PolicyFn eta_adv = [](const Vec&) { return Vec::Ones(1); };
  RandomSource rng(6);
  auto [adv, adv_se] = mc_pessimistic_value(m, pol, eta_adv, cost, 0.9, no_noise, x0, 8, rng, 200);
  CHECK(std::abs(adv - vp(x0)) <= 3.0 * adv_se + interp_margin + 1e-6);

  // arbitrary fixed eta policies always underestimate the max
  for (double e : {-1.0, -0.3, 0.0, 0.4, 0.9}) {
    PolicyFn eta = [e](const Vec&) { return Vec::Constant(1, e); };
    RandomSource r(7);
    auto [lower, lower_se] = mc_pessimistic_value(m, pol, eta, cost, 0.9, no_noise, x0, 8, r, 200);
    CHECK(lower <= vp(x0) + 3.0 * lower_se + interp_margin + 1e-6);
  }

  PolicyFn eta_bad = [](const Vec&) { return Vec::Constant(1, 1.5); };
  RandomSource r2(8);
  CHECK_THROWS(mc_pessimistic_value(m, pol, eta_bad, cost, 0.9, no_noise, x0, 2, r2, 10));
}

TEST_CASE("drift check on a contractive system holds with positive rate") {
  // Deterministic contraction toward x = 0 where the cost vanishes.
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.5 * x; };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Constant(1, 0.01); }, 1.0,
                         1);
  CostFn cost = [](const Vec& x) { return std::abs(x[0]); };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  GridSpec grid = line_grid(-1.0, 1.0, 41);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  SolveOptions opts;
  opts.tol = 1e-11;
  GridValueFunction vp = pessimistic_value_grid(m, pol, cost, 0.9, grid, quad, {}, opts);
  std::vector<double> worst = worst_case_next_values(vp, m, pol, quad, {});

  // Grid C_min estimate: the node at the cost minimum carries the residual
  // adversarial value and is excluded as degenerate rather than breaking the
  // rate.
  DriftResult drift =
      check_drift(vp, worst, [](const Vec&) { return true; }, vp.min_value());
  CHECK(drift.holds);
  CHECK(drift.lambda_max > 0.0);
  CHECK(drift.checked > 0);
  CHECK(drift.excluded > 0);
}

TEST_CASE("drift check fails when the uncertainty reaches unsafe from everywhere") {
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.9 * x; };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Constant(1, 2.0); }, 1.0,
                         1);
  CostFn cost = [](const Vec& x) { return x[0] > 0.5 ? 1.0 : 0.1; };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  GridSpec grid = line_grid(-1.0, 1.0, 21);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  GridValueFunction vp = pessimistic_value_grid(m, pol, cost, 0.9, grid, quad, {});
  std::vector<double> worst = worst_case_next_values(vp, m, pol, quad, {});
  DriftResult drift = check_drift(vp, worst, [](const Vec& x) { return x[0] <= 0.5; }, 0.0);
  CHECK_FALSE(drift.holds);
}

TEST_CASE("zero cost gives the degenerate drift convention") {
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.5 * x; };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Zero(1); }, 1.0, 1);
  CostFn zero = [](const Vec&) { return 0.0; };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  GridSpec grid = line_grid(-1.0, 1.0, 11);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  GridValueFunction vp = pessimistic_value_grid(m, pol, zero, 0.9, grid, quad, {});
  std::vector<double> worst = worst_case_next_values(vp, m, pol, quad, {});
  DriftResult drift = check_drift(vp, worst, [](const Vec&) { return true; }, 0.0);
  CHECK(drift.holds);
  CHECK(drift.degenerate);
  CHECK(std::isnan(drift.lambda_max));
}

TEST_CASE("certify_policy validates the threshold ordering and drift") {
  auto mean = [](const Vec& x, const Vec&) -> Vec { return 0.5 * x; };
  model::FunctionModel m(mean, [](const Vec&, const Vec&) { return Vec::Constant(1, 0.01); }, 1.0,
                         1);
  CostFn cost = [](const Vec& x) { return std::abs(x[0]); };
  PolicyFn pol = [](const Vec&) { return Vec::Zero(1); };
  GridSpec grid = line_grid(-1.0, 1.0, 41);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  GridValueFunction vp = pessimistic_value_grid(m, pol, cost, 0.9, grid, quad, {});
  std::vector<double> worst = worst_case_next_values(vp, m, pol, quad, {});
  DriftResult drift =
      check_drift(vp, worst, [](const Vec&) { return true; }, vp.min_value());
  REQUIRE(drift.holds);

  CertInput input = certify_policy(vp, worst, 0.5, 1.0, drift);
  CHECK(input.lambda == drift.lambda_max);
  CHECK(input.v_min == vp.min_value());
  CHECK_THROWS(certify_policy(vp, worst, 1.0, 1.0, drift));  // xi == xi_bar

  DriftResult broken = drift;
  broken.holds = false;
  CHECK_THROWS(certify_policy(vp, worst, 0.5, 1.0, broken));
}

TEST_CASE("level-set containment: nodes below xi_bar are safe (indicator cost)") {
  envs::Environment env = envs::make_double_integrator_env();
  objective::ImmediateCost cost = objective::indicator_cost(env.safe);
  PolicyFn brake = [](const Vec& x) { return Vec::Constant(1, -0.6 * x[1] - 0.5 * x[0]); };
  GridSpec grid(Vec::Constant(2, -1.8), Vec::Constant(2, 1.8), {25, 25});
  NoiseQuadrature quad = NoiseQuadrature::deterministic(2);
  SolveOptions opts;
  opts.tol = 1e-10;
  GridValueFunction v = solve_value_grid(
      [&](const Vec& x) { return env.drift(x, brake(x)); }, cost.c, 0.99, grid, quad, opts);
  for (std::size_t i = 0; i < v.values().size(); ++i) {
    if (v.values()[i] < 1.0) CHECK(env.safe(grid.node(i)));
  }
}

TEST_CASE("grid CSV export has one row per node") {
  GridSpec grid = line_grid(0.0, 1.0, 5);
  GridValueFunction v(grid, 0.25);
  std::stringstream ss;
  v.write_csv(ss);
  int lines = 0;
  std::string line;
  while (std::getline(ss, line)) ++lines;
  CHECK(lines == 6);  // header + 5 nodes
}

TEST_CASE("non-convergence raises with the residual in the message") {
  GridSpec grid = line_grid(-1.0, 1.0, 5);
  NoiseQuadrature quad = NoiseQuadrature::deterministic(1);
  SolveOptions opts;
  opts.tol = 1e-12;
  opts.max_sweeps = 3;
  CHECK_THROWS_AS(solve_value_grid([](const Vec& x) -> Vec { return x; },
                                   [](const Vec&) { return 1.0; }, 0.99, grid, quad, opts),
                  std::runtime_error);
}
