#include "safefilter/value/quadrature.hpp"

#include "safefilter/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace safefilter::value {

std::pair<std::vector<double>, std::vector<double>> gauss_hermite_probabilist(int n) {
  require(n >= 1, "gauss_hermite: n >= 1");
  // Golub-Welsch on the Jacobi matrix of the probabilist Hermite recurrence.
  Mat jacobi = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double off = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = off;
    jacobi(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
  std::vector<double> nodes(n), weights(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = eig.eigenvalues()[i];
    double v0 = eig.eigenvectors()(0, i);
    weights[i] = v0 * v0;
  }
  return {nodes, weights};
}

NoiseQuadrature NoiseQuadrature::for_noise(const NoiseModel& noise, int gh_points_per_dim,
                                           int mc_samples, std::uint64_t seed) {
  const int dim = static_cast<int>(noise.dim());
  if (noise.is_zero()) return deterministic(dim);

  NoiseQuadrature quad;
  if (noise.kind == NoiseKind::GaussianDiagonal) {
    auto [h_nodes, h_weights] = gauss_hermite_probabilist(gh_points_per_dim);
    const int n = gh_points_per_dim;
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
    quad.weights.reserve(total);
    quad.nodes.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rest = flat;
      double w = 1.0;
      Vec node(dim);
      for (int d = dim - 1; d >= 0; --d) {
        int j = static_cast<int>(rest % n);
        rest /= n;
        w *= h_weights[j];
        node[d] = noise.scale[d] * h_nodes[j];
      }
      quad.weights.push_back(w);
      quad.nodes.push_back(std::move(node));
    }
    return quad;
  }

  // Fixed seeded sample set, centered and variance-matched per dimension.
  RandomSource rng(seed, 7);
  Mat samples(mc_samples, dim);
  for (int i = 0; i < mc_samples; ++i) {
    Vec w = noise.sample(rng);
    samples.row(i) = w.transpose();
  }
  Vec mean = samples.colwise().mean().transpose();
  samples.rowwise() -= mean.transpose();
  Vec target_std = noise.std_dev();
  for (int d = 0; d < dim; ++d) {
    double sd = std::sqrt(samples.col(d).squaredNorm() / mc_samples);
    if (sd > 0.0 && target_std[d] > 0.0) samples.col(d) *= target_std[d] / sd;
  }
  quad.weights.assign(mc_samples, 1.0 / mc_samples);
  for (int i = 0; i < mc_samples; ++i) quad.nodes.push_back(samples.row(i).transpose());
  return quad;
}

}  // namespace safefilter::value
