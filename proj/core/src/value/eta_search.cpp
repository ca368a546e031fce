#include "safefilter/value/eta_search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace safefilter::value {
namespace {

std::vector<Vec> make_candidates(EtaSearchOptions::Mode mode, int dim) {
  std::vector<Vec> out;
  if (mode == EtaSearchOptions::Mode::Grid3) {
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= 3;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rest = flat;
      Vec eta(dim);
      for (int d = 0; d < dim; ++d) {
        eta[d] = static_cast<double>(rest % 3) - 1.0;
        rest /= 3;
      }
      out.push_back(std::move(eta));
    }
  } else {
    out.push_back(Vec::Zero(dim));
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= 2;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rest = flat;
      Vec eta(dim);
      for (int d = 0; d < dim; ++d) {
        eta[d] = (rest % 2) ? 1.0 : -1.0;
        rest /= 2;
      }
      out.push_back(std::move(eta));
    }
  }
  return out;
}

double expected_value(const GridValueFunction& v, const Vec& next_mean,
                      const NoiseQuadrature& quad) {
  double acc = 0.0;
  Vec x(next_mean.size());
  for (std::size_t q = 0; q < quad.size(); ++q) {
    x = next_mean + quad.nodes[q];
    acc += quad.weights[q] * v(x);
  }
  return acc;
}

}  // namespace

const std::vector<Vec>& eta_candidates(EtaSearchOptions::Mode mode, int dim) {
  static std::map<std::pair<int, int>, std::vector<Vec>> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(static_cast<int>(mode), dim);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make_candidates(mode, dim)).first;
  return it->second;
}

double worst_case_next_value(const GridValueFunction& v, const Vec& mu, const Vec& spread,
                             const NoiseQuadrature& quad, const EtaSearchOptions& opts,
                             Vec* argmax_eta) {
  const int dim = static_cast<int>(mu.size());
  if (spread.isZero(0.0)) {
    if (argmax_eta) *argmax_eta = Vec::Zero(dim);
    return expected_value(v, mu, quad);
  }

  auto eval = [&](const Vec& eta) { return expected_value(v, mu + spread.cwiseProduct(eta), quad); };

  Vec best_eta = Vec::Zero(dim);
  double best = eval(best_eta);
  for (const Vec& eta : eta_candidates(opts.mode, dim)) {
    double val = eval(eta);
    if (val > best) {
      best = val;
      best_eta = eta;
    }
  }

  if (dim == 1 && opts.exact_1d && spread[0] > 0.0) {
    // The objective restricted to a 1-D segment is piecewise linear with
    // breakpoints where mu + spread*eta + omega_q crosses a grid node.
    const auto& ax = v.grid().axes[0];
    double h = (ax.hi - ax.lo) / (ax.points - 1);
    for (std::size_t q = 0; q < quad.size(); ++q) {
      double base = mu[0] + quad.nodes[q][0];
      double eta_lo = -1.0, eta_hi = 1.0;
      double x_lo = base + spread[0] * eta_lo;
      double x_hi = base + spread[0] * eta_hi;
      int i_lo = std::max(0, static_cast<int>(std::ceil((x_lo - ax.lo) / h)));
      int i_hi = std::min(ax.points - 1, static_cast<int>(std::floor((x_hi - ax.lo) / h)));
      for (int i = i_lo; i <= i_hi; ++i) {
        double eta = (ax.lo + i * h - base) / spread[0];
        if (eta < -1.0 || eta > 1.0) continue;
        Vec cand(1);
        cand[0] = eta;
        double val = eval(cand);
        if (val > best) {
          best = val;
          best_eta = cand;
        }
      }
    }
  } else if (opts.refine) {
    // One coordinate-wise pass around the best candidate.
    Vec eta = best_eta;
    for (int d = 0; d < dim; ++d) {
      double saved = eta[d];
      double local_best = best;
      double local_arg = saved;
      for (int i = 0; i < opts.refine_points; ++i) {
        double t = -1.0 + 2.0 * i / (opts.refine_points - 1);
        if (t == saved) continue;
        eta[d] = t;
        double val = eval(eta);
        if (val > local_best) {
          local_best = val;
          local_arg = t;
        }
      }
      eta[d] = local_arg;
      best = local_best;
    }
    best_eta = eta;
  }

  if (argmax_eta) *argmax_eta = best_eta;
  return best;
}

double worst_case_next_value(const GridValueFunction& v, const model::CalibratedModel& m,
                             const Vec& x, const Vec& u, const NoiseQuadrature& quad,
                             const EtaSearchOptions& opts, Vec* argmax_eta) {
  model::Prediction p = m.predict(x, u);
  return worst_case_next_value(v, p.mu, m.beta() * p.sigma, quad, opts, argmax_eta);
}

}  // namespace safefilter::value
