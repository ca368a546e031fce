#pragma once

#include "safefilter/common.hpp"
#include "safefilter/trajectory.hpp"

#include <functional>

namespace safefilter::objective {

/// Immediate state cost with certified constants: c_lower <= c(x) <= c_upper
/// everywhere and c(x) >= c_hat on the unsafe set.
struct ImmediateCost {
  CostFn c;
  double c_lower = 0.0;
  double c_upper = 1.0;
  double c_hat = 1.0;
};

/// Indicator of the unsafe set: 1 outside the safe set, 0 inside.
/// Bounds (0, 1) with c_hat = 1.
ImmediateCost indicator_cost(std::function<bool(const Vec&)> safe);

/// Smooth saturating cost: logistic(slope * signed_distance(x)), where the
/// signed distance is positive inside the unsafe set. Bounds (0, 1) with
/// c_hat = 0.5, the value taken on the boundary.
ImmediateCost margin_cost(std::function<bool(const Vec&)> safe,
                          std::function<double(const Vec&)> signed_distance, double slope);

}  // namespace safefilter::objective
