#pragma once

#include "safefilter/common.hpp"
#include "safefilter/geometry.hpp"
#include "safefilter/random.hpp"

#include <functional>

namespace safefilter::backup {

/// Cross-entropy method over a Gaussian search distribution with a variance
/// floor. Maximizes the score; deterministic for a fixed random source.
struct CemOptions {
  int particles = 64;
  int iterations = 30;
  double elite_fraction = 0.125;
  double var_floor = 1e-6;
};

struct CemResult {
  Vec best;
  double best_score = 0.0;
  Vec mean;
  Vec std_dev;
  int evaluations = 0;
};

CemResult cem_optimize(const std::function<double(const Vec&)>& score, Vec init_mean,
                       Vec init_std, const CemOptions& opts, RandomSource& rng,
                       const Box* clamp_box = nullptr);

}  // namespace safefilter::backup
