#include "safefilter/value/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safefilter::value {
namespace {

// Per-node fixed stochastic transition, stored as merged interpolation rows.
struct FrozenTable {
  std::vector<std::size_t> offsets;  // node -> [offsets[i], offsets[i+1])
  std::vector<std::pair<std::uint32_t, double>> entries;

  void clear(std::size_t nodes) {
    offsets.assign(nodes + 1, 0);
    entries.clear();
  }
};

void append_row(FrozenTable& table, std::size_t node,
                std::vector<std::pair<std::uint32_t, double>>& scratch) {
  std::sort(scratch.begin(), scratch.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t start = table.entries.size();
  for (const auto& [corner, coeff] : scratch) {
    if (table.entries.size() > start && table.entries.back().first == corner)
      table.entries.back().second += coeff;
    else
      table.entries.emplace_back(corner, coeff);
  }
  table.offsets[node + 1] = table.entries.size();
  scratch.clear();
}

// One Jacobi sweep V_next = c + gamma * P V on the frozen table. Returns the
// sup-norm change.
double frozen_sweep(const FrozenTable& table, const std::vector<double>& cost, double gamma,
                    const std::vector<double>& v, std::vector<double>& v_next) {
  double residual = 0.0;
  const auto* entries = table.entries.data();
  for (std::size_t i = 0; i + 1 < table.offsets.size(); ++i) {
    double acc = 0.0;
    for (std::size_t e = table.offsets[i]; e < table.offsets[i + 1]; ++e)
      acc += entries[e].second * v[entries[e].first];
    double nv = cost[i] + gamma * acc;
    residual = std::max(residual, std::abs(nv - v[i]));
    v_next[i] = nv;
  }
  return residual;
}

std::vector<double> node_costs(const CostFn& cost, const GridSpec& grid) {
  std::vector<double> out(grid.node_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cost(grid.node(i));
  return out;
}

void check_converged(double residual, double tol, int sweeps, int max_sweeps) {
  if (residual > tol && sweeps >= max_sweeps)
    throw std::runtime_error("value solve did not converge: residual " +
                             std::to_string(residual) + " after " + std::to_string(sweeps) +
                             " sweeps");
}

}  // namespace

GridValueFunction solve_value_enumerated(const ExpandFn& expand, const CostFn& cost,
                                         double gamma, const GridSpec& grid,
                                         const SolveOptions& opts, SolveStats* stats,
                                         const std::vector<double>* warm_start) {
  require(gamma > 0.0 && gamma < 1.0, "solve_value: gamma must lie in (0,1)");
  const std::size_t n = grid.node_count();
  GridValueFunction v(grid, 0.0);
  if (warm_start) {
    require(warm_start->size() == n, "solve_value: warm start size mismatch");
    v.values() = *warm_start;
  }
  std::vector<double> c = node_costs(cost, grid);

  // The transition is state-fixed, so the whole operator freezes into one
  // table and every sweep is an exact Bellman application.
  FrozenTable table;
  table.clear(n);
  std::vector<std::pair<double, Vec>> mixture;
  std::vector<std::pair<std::uint32_t, double>> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    mixture.clear();
    expand(grid.node(i), mixture);
    double wsum = 0.0;
    for (const auto& [w, next] : mixture) {
      wsum += w;
      auto s = v.stencil(next);
      for (int k = 0; k < s.size; ++k) scratch.emplace_back(s.corner[k], w * s.weight[k]);
    }
    require(std::abs(wsum - 1.0) <= 1e-9, "solve_value: transition weights must sum to 1");
    append_row(table, i, scratch);
  }

  std::vector<double> next(n);
  SolveStats local;
  double residual = std::numeric_limits<double>::infinity();
  while (true) {
    residual = frozen_sweep(table, c, gamma, v.values(), next);
    v.values().swap(next);
    ++local.sweeps;
    local.residual_log.push_back(residual);
    if (residual <= opts.tol) break;
    check_converged(residual, opts.tol, local.sweeps, opts.max_sweeps);
  }
  local.residual = residual;
  if (stats) *stats = std::move(local);
  return v;
}

GridValueFunction solve_value_grid(const std::function<Vec(const Vec&)>& next_mean,
                                   const CostFn& cost, double gamma, const GridSpec& grid,
                                   const NoiseQuadrature& quad, const SolveOptions& opts,
                                   SolveStats* stats, const std::vector<double>* warm_start) {
  ExpandFn expand = [&](const Vec& x, std::vector<std::pair<double, Vec>>& out) {
    Vec mean = next_mean(x);
    for (std::size_t q = 0; q < quad.size(); ++q)
      out.emplace_back(quad.weights[q], mean + quad.nodes[q]);
  };
  return solve_value_enumerated(expand, cost, gamma, grid, opts, stats, warm_start);
}

GridValueFunction pessimistic_value_grid(const model::CalibratedModel& model,
                                         const PolicyFn& policy, const CostFn& cost,
                                         double gamma, const GridSpec& grid,
                                         const NoiseQuadrature& quad,
                                         const EtaSearchOptions& eta_opts,
                                         const SolveOptions& opts, SolveStats* stats,
                                         const std::vector<double>* warm_start) {
  require(gamma > 0.0 && gamma < 1.0, "pessimistic_value_grid: gamma must lie in (0,1)");
  const std::size_t n = grid.node_count();
  GridValueFunction v(grid, 0.0);
  if (warm_start) {
    require(warm_start->size() == n, "pessimistic_value_grid: warm start size mismatch");
    v.values() = *warm_start;
  }
  std::vector<double> c = node_costs(cost, grid);

  // Node-fixed model queries hoisted out of the sweeps.
  std::vector<Vec> mu(n), spread(n);
  bool any_spread = false;
  for (std::size_t i = 0; i < n; ++i) {
    Vec x = grid.node(i);
    model::Prediction p = model.predict(x, policy(x));
    mu[i] = std::move(p.mu);
    spread[i] = model.beta() * p.sigma;
    if (!spread[i].isZero(0.0)) any_spread = true;
  }

  if (!any_spread) {
    // Degenerate model set: the adversary has no freedom, plain solve.
    ExpandFn expand = [&](const Vec& x, std::vector<std::pair<double, Vec>>& out) {
      Vec mean = model.predict(x, policy(x)).mu;
      for (std::size_t q = 0; q < quad.size(); ++q)
        out.emplace_back(quad.weights[q], mean + quad.nodes[q]);
    };
    return solve_value_enumerated(expand, cost, gamma, grid, opts, stats, warm_start);
  }

  std::vector<double> next(n);
  std::vector<Vec> eta_star(n);
  FrozenTable table;
  std::vector<std::pair<std::uint32_t, double>> scratch;
  SolveStats local;

  while (true) {
    // Bellman sweep with a fresh inner maximization; also records eta*.
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = worst_case_next_value(v, mu[i], spread[i], quad, eta_opts, &eta_star[i]);
      double nv = c[i] + gamma * w;
      residual = std::max(residual, std::abs(nv - v.values()[i]));
      next[i] = nv;
    }
    v.values().swap(next);
    ++local.sweeps;
    local.residual_log.push_back(residual);
    local.residual = residual;
    if (residual <= opts.tol) break;
    check_converged(residual, opts.tol, local.sweeps, opts.max_sweeps);
    if (opts.plain_vi) continue;

    // Freeze the adversary and relax the induced linear system; the frozen
    // sweeps are orders of magnitude cheaper than a full maximization sweep.
    table.clear(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vec center = mu[i] + spread[i].cwiseProduct(eta_star[i]);
      for (std::size_t q = 0; q < quad.size(); ++q) {
        auto s = v.stencil(center + quad.nodes[q]);
        for (int k = 0; k < s.size; ++k)
          scratch.emplace_back(s.corner[k], quad.weights[q] * s.weight[k]);
      }
      append_row(table, i, scratch);
    }
    // Iterate-difference target scaled so the inner *distance* to the frozen
    // fixed point stays below the Bellman tolerance.
    double inner_target = std::max(opts.tol * 0.25, residual * 1e-3) * (1.0 - gamma) / gamma;
    for (int inner = 0; inner < 30000; ++inner) {
      double r = frozen_sweep(table, c, gamma, v.values(), next);
      v.values().swap(next);
      ++local.inner_sweeps;
      if (r <= inner_target) break;
    }
  }
  if (stats) *stats = std::move(local);
  return v;
}

std::pair<double, double> mc_pessimistic_value(const model::CalibratedModel& model,
                                               const PolicyFn& policy, const PolicyFn& eta_policy,
                                               const CostFn& cost, double gamma,
                                               const NoiseModel& noise, const Vec& x0, int n,
                                               RandomSource& rng, int horizon) {
  require(n >= 1, "mc_pessimistic_value: n >= 1");
  double sum = 0.0, sum_sq = 0.0;
  for (int run = 0; run < n; ++run) {
    Vec x = x0;
    double acc = 0.0;
    double g = 1.0;
    for (int k = 0; k < horizon; ++k) {
      acc += g * cost(x);
      Vec eta = eta_policy(x);
      require((eta.array().abs() <= 1.0 + 1e-12).all(),
              "mc_pessimistic_value: eta policy violated the unit box");
      x = hallucinated_step(model, x, policy(x), eta, noise.sample(rng));
      g *= gamma;
    }
    acc += g * cost(x);
    sum += acc;
    sum_sq += acc * acc;
  }
  double mean = sum / n;
  double var = std::max(0.0, sum_sq / n - mean * mean);
  double se = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  return {mean, se};
}

std::vector<double> worst_case_next_values(const GridValueFunction& v,
                                           const model::CalibratedModel& model,
                                           const PolicyFn& policy, const NoiseQuadrature& quad,
                                           const EtaSearchOptions& eta_opts) {
  const GridSpec& grid = v.grid();
  std::vector<double> w(grid.node_count());
  for (std::size_t i = 0; i < w.size(); ++i) {
    Vec x = grid.node(i);
    model::Prediction p = model.predict(x, policy(x));
    w[i] = worst_case_next_value(v, p.mu, model.beta() * p.sigma, quad, eta_opts, nullptr);
  }
  return w;
}

DriftResult check_drift(const GridValueFunction& vp, const std::vector<double>& worst_next,
                        const std::function<bool(const Vec&)>& safe, double c_min_bound,
                        std::optional<double> level_cap, double degenerate_tol) {
  const GridSpec& grid = vp.grid();
  require(worst_next.size() == grid.node_count(), "check_drift: worst_next size mismatch");
  require(c_min_bound <= vp.min_value() + 1e-12,
          "check_drift: c_min_bound must lower-bound the value function");

  DriftResult result;
  result.c_min_bound = c_min_bound;
  double lambda = std::numeric_limits<double>::infinity();
  std::size_t worst = grid.node_count();
  int safe_nodes = 0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    Vec x = grid.node(i);
    if (!safe(x)) continue;
    double vi = vp.values()[i];
    if (level_cap && vi >= *level_cap) continue;
    ++safe_nodes;
    double denom = vi - c_min_bound;
    if (denom <= degenerate_tol) {
      ++result.excluded;
      continue;
    }
    ++result.checked;
    double ratio = (vi - worst_next[i]) / denom;
    if (ratio < lambda) {
      lambda = ratio;
      worst = i;
    }
  }
  if (safe_nodes == 0) throw std::runtime_error("check_drift: no safe grid node");
  if (result.checked == 0) {
    // All eligible nodes sit at the value floor; the condition is vacuous.
    result.degenerate = true;
    result.holds = true;
    result.lambda_max = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  result.lambda_max = std::min(lambda, 1.0);  // linear class alpha(s) = lambda s, lambda <= 1
  result.holds = result.lambda_max > 0.0;
  if (worst < grid.node_count()) result.worst_state = grid.node(worst);
  return result;
}

CertInput certify_policy(const GridValueFunction& vp, const std::vector<double>& worst_next,
                         double xi, double xi_bar, const DriftResult& drift) {
  require(worst_next.size() == vp.grid().node_count(), "certify_policy: worst_next mismatch");
  if (!(xi < xi_bar))
    throw std::invalid_argument("certify_policy: xi must be strictly below xi_bar");
  if (!drift.holds || drift.degenerate || !(drift.lambda_max > 0.0))
    throw std::runtime_error("certify_policy: drift condition does not hold");
  CertInput input;
  input.lambda = drift.lambda_max;
  input.xi = xi;
  input.xi_bar = xi_bar;
  input.v_min = drift.c_min_bound;
  input.v_max = vp.max_value();
  return input;
}

}  // namespace safefilter::value
