#include "safefilter/backup/robust_vi.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safefilter::backup {
namespace {

struct Candidate {
  Vec u;
  double norm;
};

// Greedy minimax step at one node. Returns the exact minimum, the first
// index attaining it (used to freeze the relaxation table), and the
// tie-broken index for the emitted policy: ties (values within tie_tol of
// the minimum) break toward the smallest-Euclidean-norm action, then toward
// the lowest lattice index.
struct GreedyResult {
  double w_min;
  int arg_exact;
  int arg_policy;
};

GreedyResult greedy_action(const value::GridValueFunction& v,
                           const std::vector<model::Prediction>& preds, double beta,
                           const std::vector<Candidate>& candidates,
                           const value::NoiseQuadrature& quad,
                           const value::EtaSearchOptions& eta_opts, double tie_tol,
                           std::vector<double>& scratch) {
  scratch.resize(candidates.size());
  GreedyResult out{std::numeric_limits<double>::infinity(), -1, -1};
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    scratch[a] = value::worst_case_next_value(v, preds[a].mu, beta * preds[a].sigma, quad,
                                              eta_opts, nullptr);
    if (scratch[a] < out.w_min) {
      out.w_min = scratch[a];
      out.arg_exact = static_cast<int>(a);
    }
  }
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    if (scratch[a] > out.w_min + tie_tol) continue;
    if (out.arg_policy < 0 || candidates[a].norm < candidates[out.arg_policy].norm - 1e-15)
      out.arg_policy = static_cast<int>(a);
  }
  return out;
}

}  // namespace

RobustViResult robust_value_iteration(const model::CalibratedModel& model,
                                      const objective::ImmediateCost& cost, double gamma,
                                      const value::GridSpec& grid, const Box& action_box,
                                      const value::NoiseQuadrature& quad,
                                      const RobustViOptions& opts) {
  require(gamma > 0.0 && gamma < 1.0, "robust_value_iteration: gamma must lie in (0,1)");
  const std::size_t n = grid.node_count();

  std::vector<Candidate> candidates;
  for (Vec& u : action_lattice(action_box, opts.action_points_per_dim))
    candidates.push_back({u, u.norm()});
  require(!candidates.empty(), "robust_value_iteration: empty action lattice");

  // Model queries hoisted: per (node, action) prediction.
  std::vector<std::vector<model::Prediction>> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec x = grid.node(i);
    preds[i].reserve(candidates.size());
    for (const Candidate& cand : candidates) preds[i].push_back(model.predict(x, cand.u));
  }

  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = cost.c(grid.node(i));

  value::GridValueFunction v(grid, 0.0);
  std::vector<double> next(n);
  std::vector<int> greedy(n, 0);
  std::vector<Vec> eta_star(n, Vec::Zero(grid.dim()));
  value::SolveStats stats;
  const double beta = model.beta();

  std::vector<double> action_values;
  std::vector<int> frozen(n, 0);
  while (true) {
    // Full minimax Bellman sweep; records the greedy action and its adversary.
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      GreedyResult g = greedy_action(v, preds[i], beta, candidates, quad, opts.eta, opts.tie_tol,
                                     action_values);
      greedy[i] = g.arg_policy;
      frozen[i] = g.arg_exact;
      value::worst_case_next_value(v, preds[i][g.arg_exact].mu,
                                   beta * preds[i][g.arg_exact].sigma, quad, opts.eta,
                                   &eta_star[i]);
      double nv = c[i] + gamma * g.w_min;
      residual = std::max(residual, std::abs(nv - v.values()[i]));
      next[i] = nv;
    }
    v.values().swap(next);
    ++stats.sweeps;
    stats.residual_log.push_back(residual);
    stats.residual = residual;
    if (residual <= opts.solve.tol) break;
    if (stats.sweeps >= opts.solve.max_sweeps) {
      char msg[128];
      std::snprintf(msg, sizeof(msg),
                    "robust_value_iteration: no convergence, residual %.6e after %d sweeps",
                    residual, stats.sweeps);
      throw std::runtime_error(msg);
    }
    if (opts.solve.plain_vi) continue;

    // Freeze (greedy action, adversary) and relax the induced linear system.
    std::vector<std::pair<std::uint32_t, double>> entries;
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<std::pair<std::uint32_t, double>> scratch;
    for (std::size_t i = 0; i < n; ++i) {
      const model::Prediction& p = preds[i][frozen[i]];
      Vec center = p.mu + beta * p.sigma.cwiseProduct(eta_star[i]);
      for (std::size_t q = 0; q < quad.size(); ++q) {
        auto s = v.stencil(center + quad.nodes[q]);
        for (int k = 0; k < s.size; ++k)
          scratch.emplace_back(s.corner[k], quad.weights[q] * s.weight[k]);
      }
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [corner, coeff] : scratch) {
        if (entries.size() > offsets[i] && entries.back().first == corner)
          entries.back().second += coeff;
        else
          entries.emplace_back(corner, coeff);
      }
      offsets[i + 1] = entries.size();
      scratch.clear();
    }
    double inner_target =
        std::max(opts.solve.tol * 0.25, residual * 1e-3) * (1.0 - gamma) / gamma;
    for (int inner = 0; inner < 30000; ++inner) {
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e)
          acc += entries[e].second * v.values()[entries[e].first];
        double nv = c[i] + gamma * acc;
        r = std::max(r, std::abs(nv - v.values()[i]));
        next[i] = nv;
      }
      v.values().swap(next);
      ++stats.inner_sweeps;
      if (r <= inner_target) break;
    }
  }

  std::vector<Vec> actions(n);
  for (std::size_t i = 0; i < n; ++i) actions[i] = candidates[greedy[i]].u;
  RobustViResult result{std::move(v), TabularPolicy(grid, std::move(actions), action_box),
                        std::move(stats)};
  return result;
}

}  // namespace safefilter::backup
