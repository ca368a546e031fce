#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"

namespace safefilter {

/// Axis-aligned box, lower <= upper element-wise.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require(lower.size() == upper.size(), "Box: dimension mismatch");
    require_finite(lower, "Box.lower");
    require_finite(upper, "Box.upper");
    require((lower.array() <= upper.array()).all(), "Box: lower > upper");
  }

  /// Symmetric box [-half, half]^dim.
  static Box symmetric(int dim, double half) {
    return Box(Vec::Constant(dim, -half), Vec::Constant(dim, half));
  }
  /// Unit box [-1, 1]^dim (the admissible hallucination set).
  static Box unit(int dim) { return symmetric(dim, 1.0); }

  Eigen::Index dim() const { return lower.size(); }

  bool contains(const Vec& x, double tol = 0.0) const {
    return (x.array() >= lower.array() - tol).all() &&
           (x.array() <= upper.array() + tol).all();
  }

  Vec clamp(const Vec& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }

  Vec center() const { return 0.5 * (lower + upper); }
  Vec half_width() const { return 0.5 * (upper - lower); }

  Vec sample(RandomSource& rng) const {
    Vec out(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) out[i] = rng.uniform(lower[i], upper[i]);
    return out;
  }
};

}  // namespace safefilter
