#pragma once

#include "safefilter/common.hpp"
#include "safefilter/noise.hpp"

#include <vector>

namespace safefilter::value {

/// Deterministic approximation of E_omega[.] as weighted noise realizations.
/// Gaussian noise uses a tensor Gauss-Hermite rule; uniform noise uses a fixed
/// seeded sample set; zero noise collapses to a single node. Weights sum to 1
/// and the rule matches mean zero and the model variance.
struct NoiseQuadrature {
  std::vector<double> weights;
  std::vector<Vec> nodes;

  std::size_t size() const { return weights.size(); }

  static NoiseQuadrature for_noise(const NoiseModel& noise, int gh_points_per_dim = 5,
                                   int mc_samples = 64, std::uint64_t seed = 20240901);

  static NoiseQuadrature deterministic(int dim) {
    return {{1.0}, {Vec::Zero(dim)}};
  }
};

/// Nodes and weights of the n-point Gauss-Hermite rule in "probabilist" form:
/// integrates f against the standard normal density.
std::pair<std::vector<double>, std::vector<double>> gauss_hermite_probabilist(int n);

}  // namespace safefilter::value
