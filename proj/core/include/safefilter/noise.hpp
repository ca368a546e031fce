#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"

namespace safefilter {

enum class NoiseKind { Zero, GaussianDiagonal, UniformBox };

/// Zero-mean process noise. `scale` is the per-dimension standard deviation
/// (gaussian) or half-width (uniform); ignored for Zero.
struct NoiseModel {
  NoiseKind kind = NoiseKind::Zero;
  Vec scale;

  static NoiseModel zero(int dim) { return {NoiseKind::Zero, Vec::Zero(dim)}; }
  static NoiseModel gaussian(Vec std_dev) {
    require((std_dev.array() >= 0.0).all(), "NoiseModel: negative std dev");
    return {NoiseKind::GaussianDiagonal, std::move(std_dev)};
  }
  static NoiseModel uniform(Vec half_width) {
    require((half_width.array() >= 0.0).all(), "NoiseModel: negative half width");
    return {NoiseKind::UniformBox, std::move(half_width)};
  }

  Eigen::Index dim() const { return scale.size(); }
  bool is_zero() const {
    return kind == NoiseKind::Zero || scale.isZero(0.0);
  }

  Vec sample(RandomSource& rng) const {
    Vec w = Vec::Zero(dim());
    switch (kind) {
      case NoiseKind::Zero:
        break;
      case NoiseKind::GaussianDiagonal:
        for (Eigen::Index i = 0; i < dim(); ++i) w[i] = scale[i] * rng.normal();
        break;
      case NoiseKind::UniformBox:
        for (Eigen::Index i = 0; i < dim(); ++i)
          w[i] = scale[i] == 0.0 ? 0.0 : rng.uniform(-scale[i], scale[i]);
        break;
    }
    return w;
  }

  /// Per-dimension standard deviation (uniform half-width h has std h/sqrt(3)).
  Vec std_dev() const {
    switch (kind) {
      case NoiseKind::Zero: return Vec::Zero(dim());
      case NoiseKind::GaussianDiagonal: return scale;
      case NoiseKind::UniformBox: return scale / std::sqrt(3.0);
    }
    return Vec::Zero(dim());
  }
};

}  // namespace safefilter
