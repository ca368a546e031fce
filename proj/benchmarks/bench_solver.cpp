#include "safefilter/backup/robust_vi.hpp"
#include "safefilter/envs/double_integrator.hpp"
#include "safefilter/filter/filter.hpp"
#include "safefilter/objective/objective.hpp"
#include "safefilter/value/solver.hpp"

#include <benchmark/benchmark.h>

using namespace safefilter;

namespace {

struct Fixture {
  envs::Environment env = envs::make_double_integrator_env();
  model::FunctionModel model{env.drift,
                             [](const Vec&, const Vec&) { return Vec::Constant(2, 0.03); }, 1.0,
                             2};
  objective::ImmediateCost cost = objective::indicator_cost(env.safe);
  PolicyFn brake = [](const Vec& x) { return Vec::Constant(1, -0.6 * x[1] - 0.5 * x[0]); };
  value::NoiseQuadrature quad = value::NoiseQuadrature::deterministic(2);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

value::GridSpec make_grid(int points) {
  return value::GridSpec(Vec::Constant(2, -1.6), Vec::Constant(2, 1.6), {points, points});
}

const value::GridValueFunction& solved_value() {
  static value::GridValueFunction v = [] {
    Fixture& f = fixture();
    value::SolveOptions opts;
    opts.tol = 1e-9;
    return value::pessimistic_value_grid(f.model, f.brake, f.cost.c, 0.9, make_grid(33), f.quad,
                                         {}, opts);
  }();
  return v;
}

}  // namespace

static void BM_GridInterpolation(benchmark::State& state) {
  const value::GridValueFunction& v = solved_value();
  RandomSource rng(1);
  std::vector<Vec> points;
  for (int i = 0; i < 1024; ++i) {
    Vec x(2);
    x << rng.uniform(-1.6, 1.6), rng.uniform(-1.6, 1.6);
    points.push_back(std::move(x));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(v(points[i & 1023]));
    ++i;
  }
}
BENCHMARK(BM_GridInterpolation);

static void BM_WorstCaseNextValue(benchmark::State& state) {
  Fixture& f = fixture();
  const value::GridValueFunction& v = solved_value();
  Vec mu(2), spread(2);
  mu << 0.4, -0.2;
  spread << 0.03, 0.03;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        value::worst_case_next_value(v, mu, spread, f.quad, {}, nullptr));
  }
}
BENCHMARK(BM_WorstCaseNextValue);

static void BM_PessimisticValueSolve(benchmark::State& state) {
  Fixture& f = fixture();
  value::GridSpec grid = make_grid(static_cast<int>(state.range(0)));
  value::SolveOptions opts;
  opts.tol = 1e-8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        value::pessimistic_value_grid(f.model, f.brake, f.cost.c, 0.9, grid, f.quad, {}, opts));
  }
}
BENCHMARK(BM_PessimisticValueSolve)->Arg(17)->Arg(25)->Arg(33)->Unit(benchmark::kMillisecond);

static void BM_RobustValueIteration(benchmark::State& state) {
  Fixture& f = fixture();
  value::GridSpec grid = make_grid(17);
  backup::RobustViOptions opts;
  opts.solve.tol = 1e-8;
  opts.action_points_per_dim = 9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(backup::robust_value_iteration(f.model, f.cost, 0.9, grid,
                                                            f.env.action_box, f.quad, opts));
  }
}
BENCHMARK(BM_RobustValueIteration)->Unit(benchmark::kMillisecond);

static void BM_FilterFeasibleShortcut(benchmark::State& state) {
  Fixture& f = fixture();
  const value::GridValueFunction& v = solved_value();
  filter::FilterConfig config;
  config.xi = 5.0;  // generous: the nominal action always passes
  RandomSource rng(2);
  Vec x(2);
  x << -0.5, 0.1;
  Vec u = Vec::Constant(1, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        filter::filter_action(x, u, f.model, v, f.env.action_box, config, f.quad, rng));
  }
}
BENCHMARK(BM_FilterFeasibleShortcut);

static void BM_FilterCemSearch(benchmark::State& state) {
  Fixture& f = fixture();
  const value::GridValueFunction& v = solved_value();
  filter::FilterConfig config;
  config.xi = 0.05;
  config.cem_particles = 1000;
  config.cem_iterations = 5;
  RandomSource rng(3);
  Vec x(2);
  x << 0.6, 0.4;
  Vec u = Vec::Constant(1, 1.0);  // infeasible nominal: the full search runs
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        filter::filter_action(x, u, f.model, v, f.env.action_box, config, f.quad, rng));
  }
  state.SetLabel("1000 particles x 5 iterations");
}
BENCHMARK(BM_FilterCemSearch)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
