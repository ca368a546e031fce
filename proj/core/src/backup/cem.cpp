#include "safefilter/backup/cem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace safefilter::backup {

CemResult cem_optimize(const std::function<double(const Vec&)>& score, Vec init_mean,
                       Vec init_std, const CemOptions& opts, RandomSource& rng,
                       const Box* clamp_box) {
  require(opts.particles >= 2, "cem_optimize: need at least 2 particles");
  require(opts.elite_fraction > 0.0 && opts.elite_fraction <= 1.0,
          "cem_optimize: elite_fraction in (0,1]");
  const int dim = static_cast<int>(init_mean.size());
  const int elites = std::max(1, static_cast<int>(std::lround(opts.elite_fraction *
                                                              opts.particles)));

  CemResult result;
  result.mean = std::move(init_mean);
  result.std_dev = init_std.cwiseMax(std::sqrt(opts.var_floor));
  result.best = result.mean;
  result.best_score = -std::numeric_limits<double>::infinity();

  std::vector<Vec> particles(opts.particles, Vec(dim));
  std::vector<double> scores(opts.particles);
  std::vector<int> order(opts.particles);

  for (int it = 0; it < opts.iterations; ++it) {
    int finite = 0;
    for (int p = 0; p < opts.particles; ++p) {
      for (int d = 0; d < dim; ++d)
        particles[p][d] = result.mean[d] + result.std_dev[d] * rng.normal();
      if (clamp_box) particles[p] = clamp_box->clamp(particles[p]);
      scores[p] = score(particles[p]);
      ++result.evaluations;
      if (std::isfinite(scores[p])) ++finite;
    }
    if (finite == 0)
      throw std::runtime_error("cem_optimize: every candidate diverged at iteration " +
                               std::to_string(it));

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    if (scores[order[0]] > result.best_score) {
      result.best_score = scores[order[0]];
      result.best = particles[order[0]];
    }

    Vec mean = Vec::Zero(dim), sq = Vec::Zero(dim);
    int used = std::min(elites, finite);
    for (int e = 0; e < used; ++e) {
      const Vec& x = particles[order[e]];
      mean += x;
      sq += x.cwiseProduct(x);
    }
    mean /= used;
    Vec var = (sq / used - mean.cwiseProduct(mean)).cwiseMax(opts.var_floor);
    result.mean = std::move(mean);
    result.std_dev = var.cwiseSqrt();
  }
  return result;
}

}  // namespace safefilter::backup
